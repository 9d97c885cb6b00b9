"""YAML run configuration.  The schema is documented in docs/config_schema.md."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .addertree import Variant
from .errors import ConfigError, MissingFileError, ShapeChainError
from .network import (ActivationLayer, ConvLayer, DenseLayer, Model, PoolLayer,
                      _next_shape, _random_kernels, random_input)
from .reference import Activation, PoolMode
from .tensors import FeatureMap, KernelSet, load_tensor


@dataclass(frozen=True)
class ConvSpec:
    kernel: int
    count: int
    stride: int = 1
    weights: str | None = None
    name: str = "conv"


@dataclass(frozen=True)
class ActivationSpec:
    function: Activation = Activation.RELU
    name: str = "act"


@dataclass(frozen=True)
class PoolSpec:
    size: int = 2
    stride: int = 2
    mode: PoolMode = PoolMode.MAX
    name: str = "pool"


@dataclass(frozen=True)
class DenseSpec:
    outputs: int
    weights: str | None = None
    name: str = "fc"


@dataclass(frozen=True)
class TraceSpec:
    height: int = 5
    width: int = 5
    kernel: int = 3
    stride: int = 1


MNIST_NETWORK = (
    ConvSpec(3, 15, 1, name="conv1"),
    ActivationSpec(name="act1"),
    PoolSpec(2, 2, name="pool1"),
    ConvSpec(6, 20, 1, name="conv2"),
    ActivationSpec(name="act2"),
    PoolSpec(2, 2, name="pool2"),
    DenseSpec(10, name="fc"),
)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    clock_mhz: float = 100.0
    variants: tuple = (Variant.IMPROVED,)
    pn: int | None = None
    pm: int | None = None
    power_watts: float | None = None
    workers: int = 2
    input_shape: tuple = (1, 28, 28)
    input_file: str | None = None
    network: tuple = MNIST_NETWORK
    tree_etas: tuple = tuple(range(1, 65))
    tree_dump: int | None = 9
    trace: TraceSpec = field(default_factory=TraceSpec)
    base_dir: Path = Path(".")

    @property
    def clock_hz(self) -> float:
        return self.clock_mhz * 1e6


# -- parsing ------------------------------------------------------------------

def _int(section: dict, key: str, where: str, minimum: int = 1, default=None):
    if key not in section:
        if default is not None or minimum is None:
            return default
        raise ConfigError("missing required value", field=f"{where}.{key}")
    v = section[key]
    if v is None and default is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", field=f"{where}.{key}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"must be >= {minimum}, got {v}", field=f"{where}.{key}")
    return v


def _float(section, key, where, default):
    v = section.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
        raise ConfigError(f"expected a positive number, got {v!r}", field=f"{where}.{key}")
    return float(v)


def _enum(cls, value, where):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ConfigError(f"{value!r} is not one of: {choices}", field=where) from None


def _section(doc, key):
    s = doc.get(key) or {}
    if not isinstance(s, dict):
        raise ConfigError("expected a mapping", field=key)
    return s


def _unknown(section, allowed, where):
    extra = sorted(set(section) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) {extra}", field=where)


def _parse_layer(i, item):
    where = f"network[{i}]"
    if not isinstance(item, dict) or "type" not in item:
        raise ConfigError("layer must be a mapping with a 'type'", field=where)
    kind = item["type"]
    name = str(item.get("name", f"{kind}{i + 1}"))
    if kind == "conv":
        _unknown(item, {"type", "name", "kernel", "count", "stride", "weights"}, where)
        return ConvSpec(_int(item, "kernel", where), _int(item, "count", where),
                        _int(item, "stride", where, default=1), item.get("weights"), name)
    if kind == "activation":
        _unknown(item, {"type", "name", "function"}, where)
        return ActivationSpec(_enum(Activation, item.get("function", "relu"), f"{where}.function"), name)
    if kind == "pool":
        _unknown(item, {"type", "name", "size", "stride", "mode"}, where)
        return PoolSpec(_int(item, "size", where, default=2), _int(item, "stride", where, default=2),
                        _enum(PoolMode, item.get("mode", "max"), f"{where}.mode"), name)
    if kind == "fc":
        _unknown(item, {"type", "name", "outputs", "weights"}, where)
        return DenseSpec(_int(item, "outputs", where), item.get("weights"), name)
    raise ConfigError(f"unknown layer type {kind!r}", field=f"{where}.type")


def parse_config(text: str, base_dir: Path = Path(".")) -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line, col = (mark.line + 1, mark.column + 1) if mark else (None, None)
        raise ConfigError(f"YAML parse error: {exc.problem or exc}", line=line, column=col) from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping")
    _unknown(doc, {"run", "input", "network", "tree", "trace"}, "<top>")

    run = _section(doc, "run")
    _unknown(run, {"seed", "clock_mhz", "variant", "variants", "pn", "pm", "power_watts",
                   "workers"}, "run")
    variants = run.get("variants", run.get("variant", "improved"))
    if isinstance(variants, str):
        variants = [variants]
    if not variants:
        raise ConfigError("need at least one tree variant", field="run.variants")
    variants = tuple(_enum(Variant, v, "run.variants") for v in variants)
    cfg = RunConfig(
        seed=_int(run, "seed", "run", minimum=0, default=0),
        clock_mhz=_float(run, "clock_mhz", "run", 100.0),
        variants=variants,
        pn=_int(run, "pn", "run", minimum=1, default=None) if run.get("pn") is not None else None,
        pm=_int(run, "pm", "run", minimum=1, default=None) if run.get("pm") is not None else None,
        power_watts=_float(run, "power_watts", "run", None),
        workers=_int(run, "workers", "run", default=2),
        base_dir=Path(base_dir),
    )

    inp = _section(doc, "input")
    _unknown(inp, {"shape", "file"}, "input")
    if "shape" in inp:
        shape = inp["shape"]
        if (not isinstance(shape, list) or len(shape) != 3
                or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in shape)):
            raise ConfigError(f"expected [channels, height, width] of positive integers, got {shape!r}",
                              field="input.shape")
        cfg = replace(cfg, input_shape=tuple(shape))
    cfg = replace(cfg, input_file=inp.get("file"))

    if "network" in doc:
        layers = doc["network"]
        if not isinstance(layers, list) or not layers:
            raise ConfigError("expected a non-empty list of layers", field="network")
        cfg = replace(cfg, network=tuple(_parse_layer(i, item) for i, item in enumerate(layers)))

    tree = _section(doc, "tree")
    _unknown(tree, {"eta", "dump"}, "tree")
    if "eta" in tree:
        eta = tree["eta"]
        if isinstance(eta, int) and not isinstance(eta, bool):
            eta = [eta, eta]
        if (not isinstance(eta, list) or len(eta) != 2
                or not all(isinstance(e, int) and not isinstance(e, bool) for e in eta)
                or eta[0] < 1 or eta[1] < eta[0]):
            raise ConfigError(f"expected [first, last] with 1 <= first <= last, got {eta!r}",
                              field="tree.eta")
        cfg = replace(cfg, tree_etas=tuple(range(eta[0], eta[1] + 1)))
    if "dump" in tree:
        cfg = replace(cfg, tree_dump=_int(tree, "dump", "tree", default=None))

    tr = _section(doc, "trace")
    _unknown(tr, {"height", "width", "kernel", "stride"}, "trace")
    if tr:
        d = TraceSpec()
        cfg = replace(cfg, trace=TraceSpec(
            _int(tr, "height", "trace", default=d.height), _int(tr, "width", "trace", default=d.width),
            _int(tr, "kernel", "trace", default=d.kernel), _int(tr, "stride", "trace", default=d.stride)))
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"config file not found: {path}")
    return parse_config(path.read_text(), base_dir=path.parent)


# -- model / input construction -----------------------------------------------

def _rngs(seed: int):
    weights_seq, input_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(weights_seq), np.random.default_rng(input_seq)


def _load_kernels(cfg, path, idx, name, expect) -> KernelSet:
    k = load_tensor(cfg.base_dir / path)
    if not isinstance(k, KernelSet):
        raise ShapeChainError(idx, name, f"{path} holds a feature map, not kernels")
    if k.weights.shape != expect:
        raise ShapeChainError(idx, name, f"{path} has kernel shape {k.weights.shape}, expected {expect}")
    return k


def build_model(cfg: RunConfig) -> Model:
    """Instantiate the configured layers; missing weights are drawn from the seed."""
    wrng, _ = _rngs(cfg.seed)
    shape = tuple(cfg.input_shape)
    layers = []
    for idx, spec in enumerate(cfg.network):
        N = shape[0]
        if isinstance(spec, ConvSpec):
            expect = (spec.count, N, spec.kernel, spec.kernel)
            k = (_load_kernels(cfg, spec.weights, idx, spec.name, expect) if spec.weights
                 else _random_kernels(wrng, *expect))
            layer = ConvLayer(k, spec.stride, spec.name)
        elif isinstance(spec, ActivationSpec):
            layer = ActivationLayer(spec.function, spec.name)
        elif isinstance(spec, PoolSpec):
            layer = PoolLayer(spec.size, spec.stride, spec.mode, spec.name)
        else:
            expect = (spec.outputs, shape[0] * shape[1] * shape[2], 1, 1)
            k = (_load_kernels(cfg, spec.weights, idx, spec.name, expect) if spec.weights
                 else _random_kernels(wrng, *expect))
            layer = DenseLayer(k, spec.name)
        shape = _next_shape(idx, layer, shape)
        layers.append(layer)
    return Model(tuple(cfg.input_shape), tuple(layers))


def build_input(cfg: RunConfig) -> FeatureMap:
    if cfg.input_file:
        x = load_tensor(cfg.base_dir / cfg.input_file)
        if not isinstance(x, FeatureMap):
            raise ConfigError("input file holds kernels, not a feature map", field="input.file")
        if tuple(x.shape) != tuple(cfg.input_shape):
            raise ShapeChainError(0, "input", f"file shape {x.shape} != configured {cfg.input_shape}")
        return x
    _, irng = _rngs(cfg.seed)
    return random_input(irng, cfg.input_shape)
