"""Layer lists, the demo MNIST network, and end-to-end runners.

Convolutions go through the cycle-accurate simulator; activation, pooling and
the dense layer use the reference operators.  A dense layer's weights are held
as a ``[outputs, inputs, 1, 1]`` :class:`KernelSet` so every parameterised
layer shares one container and one file format.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import reference as ref
from .dataflow import PipelineConfig, run_layer
from .errors import ConvAccelError, ShapeChainError
from .perf import NetworkStats
from .reference import Activation, PoolMode
from .tensors import FeatureMap, KernelSet, output_dims


@dataclass(frozen=True)
class ConvLayer:
    kernels: KernelSet
    stride: int = 1
    name: str = "conv"

    @property
    def parameter_count(self) -> int:
        return self.kernels.parameter_count


@dataclass(frozen=True)
class ActivationLayer:
    kind: Activation = Activation.RELU
    name: str = "act"
    parameter_count = 0


@dataclass(frozen=True)
class PoolLayer:
    size: int = 2
    stride: int = 2
    mode: PoolMode = PoolMode.MAX
    name: str = "pool"
    parameter_count = 0


@dataclass(frozen=True)
class DenseLayer:
    kernels: KernelSet
    name: str = "fc"

    @property
    def outputs(self) -> int:
        return self.kernels.kernels

    @property
    def inputs(self) -> int:
        return self.kernels.channels

    @property
    def parameter_count(self) -> int:
        return self.kernels.parameter_count


@dataclass(frozen=True)
class Model:
    input_shape: tuple
    layers: tuple

    def parameter_counts(self):
        return [l.parameter_count for l in self.layers if l.parameter_count]

    def shapes(self):
        """Output shape after each layer; raises ShapeChainError on a mismatch."""
        shape = tuple(self.input_shape)
        out = []
        for idx, layer in enumerate(self.layers):
            shape = _next_shape(idx, layer, shape)
            out.append(shape)
        return out


def _next_shape(idx, layer, shape):
    if len(shape) != 3:
        raise ShapeChainError(idx, layer.name, f"expects a feature map, got shape {shape}")
    N, H, W = shape
    try:
        if isinstance(layer, ConvLayer):
            k = layer.kernels
            if k.channels != N:
                raise ShapeChainError(idx, layer.name,
                                      f"kernels take {k.channels} channels, input has {N}")
            return (k.kernels,) + output_dims(H, W, k.kernel_height, k.kernel_width,
                                              layer.stride, layer.stride)
        if isinstance(layer, PoolLayer):
            return (N,) + output_dims(H, W, layer.size, layer.size, layer.stride, layer.stride)
        if isinstance(layer, ActivationLayer):
            return shape
        if isinstance(layer, DenseLayer):
            if layer.inputs != N * H * W:
                raise ShapeChainError(idx, layer.name,
                                      f"takes {layer.inputs} inputs, previous layer gives "
                                      f"{N}x{H}x{W} = {N * H * W}")
            return (layer.outputs, 1, 1)
    except ShapeChainError:
        raise
    except ConvAccelError as exc:
        raise ShapeChainError(idx, layer.name, str(exc)) from exc
    raise TypeError(f"unknown layer type {type(layer).__name__}")


def _random_kernels(rng, M, N, Hk, Wk) -> KernelSet:
    fan_in = N * Hk * Wk
    bound = 1.0 / np.sqrt(fan_in)
    return KernelSet.from_real(rng.uniform(-bound, bound, (M, N, Hk, Wk)),
                               rng.uniform(-0.1, 0.1, M))


def mnist_model(rng=None, activation=Activation.RELU, pool_mode=PoolMode.MAX) -> Model:
    """28x28 input; conv 3x3x15 -> act -> pool 2/2 -> conv 6x6x20 -> act -> pool 2/2 -> fc 10.

    Parameter counts are 150, 10820 and 3210.
    """
    rng = np.random.default_rng(rng)
    return Model((1, 28, 28), (
        ConvLayer(_random_kernels(rng, 15, 1, 3, 3), 1, "conv1"),
        ActivationLayer(activation, "act1"),
        PoolLayer(2, 2, pool_mode, "pool1"),
        ConvLayer(_random_kernels(rng, 20, 15, 6, 6), 1, "conv2"),
        ActivationLayer(activation, "act2"),
        PoolLayer(2, 2, pool_mode, "pool2"),
        DenseLayer(_random_kernels(rng, 10, 320, 1, 1), "fc"),
    ))


def random_input(rng, shape=(1, 28, 28)) -> FeatureMap:
    return FeatureMap.from_real(np.random.default_rng(rng).uniform(0.0, 1.0, shape))


def _apply_other(layer, x):
    if isinstance(layer, ActivationLayer):
        return ref.activation(x, layer.kind)
    if isinstance(layer, PoolLayer):
        return ref.pool(x, layer.size, layer.stride, layer.mode)
    if isinstance(layer, DenseLayer):
        w = layer.kernels.weights.reshape(layer.outputs, layer.inputs)
        scores = ref.fully_connected(x, w, layer.kernels.bias)
        return FeatureMap(scores.reshape(-1, 1, 1))
    raise TypeError(f"unknown layer type {type(layer).__name__}")


def run_network(x: FeatureMap, model: Model, cfg: PipelineConfig = PipelineConfig()):
    """Returns ``(scores, NetworkStats, conv_outputs)``; scores are raw Q8.8 words."""
    if tuple(x.shape) != tuple(model.input_shape):
        raise ShapeChainError(0, model.layers[0].name,
                              f"network expects input {model.input_shape}, got {x.shape}")
    model.shapes()
    conv_stats, conv_outputs, dense_macs = [], [], 0
    for layer in model.layers:
        if isinstance(layer, ConvLayer):
            k = layer.kernels
            layer_cfg = replace(
                cfg,
                pn=None if cfg.pn is None else min(cfg.pn, k.channels),
                pm=None if cfg.pm is None else min(cfg.pm, k.kernels),
                stride_h=layer.stride, stride_w=layer.stride)
            x, stats = run_layer(x, k, layer_cfg, name=layer.name)
            conv_stats.append(stats)
            conv_outputs.append(x)
        else:
            if isinstance(layer, DenseLayer):
                dense_macs += layer.inputs * layer.outputs
            x = _apply_other(layer, x)
    return x.data.reshape(-1), NetworkStats(tuple(conv_stats), dense_macs), conv_outputs


def run_network_reference(x: FeatureMap, model: Model):
    """All-reference forward pass; returns ``(scores, conv_outputs)``."""
    model.shapes()
    conv_outputs = []
    for layer in model.layers:
        if isinstance(layer, ConvLayer):
            x = ref.conv_reference(x, layer.kernels, layer.stride, layer.stride)
            conv_outputs.append(x)
        else:
            x = _apply_other(layer, x)
    return x.data.reshape(-1), conv_outputs
