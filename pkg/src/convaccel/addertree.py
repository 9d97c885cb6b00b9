"""Layered adder-tree reduction schedules and their hardware cost.

Two variants are modelled:

* ``classic`` pads the ``eta`` inputs with zeros up to the next power of two and
  sums neighbouring pairs layer by layer.
* ``improved`` never pads.  A layer with an odd number of inputs sums the pairs
  and forwards its last element unchanged to the end of the next layer, so each
  layer of width ``m`` produces ``ceil(m / 2)`` outputs.

Both take ``ceil(log2(eta))`` adder layers.  Registers are counted as one per
slot of every layer, the input layer included.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EmptyReductionError, ShapeError
from .fixedpoint import mul_array


class Variant(str, enum.Enum):
    CLASSIC = "classic"
    IMPROVED = "improved"


def ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


@dataclass(frozen=True)
class TreeCost:
    adders: int
    registers: int
    cycles: int


@dataclass(frozen=True)
class ReductionSchedule:
    """Wiring of a reduction tree.

    ``layers[i]`` lists the nodes of adder layer ``i``; each node is a tuple of
    indices into the previous layer's outputs: two for an adder, one for a
    passthrough register.  ``slots`` is the width of the input row; for the
    classic variant slots ``input_count..slots-1`` are constant zero.
    """
    variant: Variant
    input_count: int
    slots: int
    layers: tuple
    _plan: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        plan = []
        for layer in self.layers:
            adders = [n for n in layer if len(n) == 2]
            passes = [n[0] for n in layer if len(n) == 1]
            if layer[:len(adders)] != tuple(adders):
                raise ValueError("passthrough nodes must follow the adders in a layer")
            plan.append((np.array([n[0] for n in adders], dtype=np.intp),
                         np.array([n[1] for n in adders], dtype=np.intp),
                         np.array(passes, dtype=np.intp)))
        object.__setattr__(self, "_plan", tuple(plan))

    @property
    def widths(self) -> tuple:
        return (self.slots,) + tuple(len(layer) for layer in self.layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def dump(self) -> str:
        lines = [f"variant {self.variant.value}",
                 f"inputs {self.input_count}",
                 f"slots {self.slots}" + (f" (zero-padded from {self.input_count})"
                                          if self.slots > self.input_count else "")]
        for i, layer in enumerate(self.layers, 1):
            nodes = " ".join(("A" if len(n) == 2 else "P") + "(" + ",".join(map(str, n)) + ")"
                             for n in layer)
            lines.append(f"layer {i} width {len(layer)}: {nodes}")
        c = cost(self)
        lines.append(f"cost adders={c.adders} registers={c.registers} cycles={c.cycles}")
        return "\n".join(lines) + "\n"


def _pairs(width: int) -> tuple:
    nodes = tuple((2 * i, 2 * i + 1) for i in range(width // 2))
    if width % 2:
        nodes += ((width - 1,),)
    return nodes


def _check_count(eta: int):
    if eta < 1:
        raise EmptyReductionError(f"cannot build a reduction over {eta} inputs")


@lru_cache(maxsize=None)
def build_classic(eta: int) -> ReductionSchedule:
    _check_count(eta)
    width = 1 << ceil_log2(eta)
    slots = width
    layers = []
    while width > 1:
        layers.append(_pairs(width))
        width //= 2
    return ReductionSchedule(Variant.CLASSIC, eta, slots, tuple(layers))


@lru_cache(maxsize=None)
def build_improved(eta: int) -> ReductionSchedule:
    _check_count(eta)
    width = eta
    layers = []
    while width > 1:
        layers.append(_pairs(width))
        width = (width + 1) // 2
    return ReductionSchedule(Variant.IMPROVED, eta, eta, tuple(layers))


def build(variant, eta: int) -> ReductionSchedule:
    variant = Variant(variant)
    return build_classic(eta) if variant is Variant.CLASSIC else build_improved(eta)


def cost(schedule: ReductionSchedule) -> TreeCost:
    adders = sum(1 for layer in schedule.layers for n in layer if len(n) == 2)
    return TreeCost(adders, sum(schedule.widths), schedule.depth)


def classic_cost_formula(eta: int) -> TreeCost:
    """Closed form of the classic tree's cost (adders, registers, cycles)."""
    _check_count(eta)
    c = ceil_log2(eta)
    return TreeCost((1 << c) - 1, (1 << (c + 1)) - 1, c)


def improved_cost_formula(eta: int) -> TreeCost:
    _check_count(eta)
    registers, width = eta, eta
    while width > 1:
        width = (width + 1) // 2
        registers += width
    return TreeCost(eta - 1, registers, ceil_log2(eta))


def reduce(schedule: ReductionSchedule, values):
    """Sum ``values`` through the tree, layer by layer.

    The last axis of ``values`` holds the ``eta`` inputs; leading axes are
    independent trees evaluated side by side.  Integer inputs stay exact.
    """
    v = np.asarray(values)
    if v.ndim == 0 or v.shape[-1] != schedule.input_count:
        raise ShapeError(f"tree takes {schedule.input_count} inputs, got shape {v.shape}")
    if not (np.issubdtype(v.dtype, np.integer) or v.dtype == object):
        raise TypeError(f"reduction inputs must be integers, got {v.dtype}")
    if v.dtype != object:
        v = v.astype(np.int64, copy=False)
    if schedule.slots > schedule.input_count:
        pad = np.zeros(v.shape[:-1] + (schedule.slots - schedule.input_count,), dtype=v.dtype)
        v = np.concatenate([v, pad], axis=-1)
    for left, right, passes in schedule._plan:
        summed = v[..., left] + v[..., right]
        v = np.concatenate([summed, v[..., passes]], axis=-1) if passes.size else summed
    out = v[..., 0]
    return int(out) if out.ndim == 0 else out


def multiply_add_tree(window, kernel, variant=Variant.IMPROVED) -> int:
    """K*K parallel multipliers feeding one reduction tree."""
    w = np.asarray(window)
    k = np.asarray(kernel)
    if w.shape != k.shape:
        raise ShapeError(f"window {w.shape} vs kernel {k.shape}")
    products = mul_array(w, k).reshape(-1)
    return reduce(build(variant, products.size), products)


COST_COLUMNS = ("eta", "variant", "adders", "registers", "cycles")


def cost_table_csv(etas, variants=(Variant.CLASSIC, Variant.IMPROVED)) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COST_COLUMNS)
    for eta in etas:
        for variant in variants:
            c = cost(build(variant, eta))
            writer.writerow((eta, Variant(variant).value, c.adders, c.registers, c.cycles))
    return buf.getvalue()
