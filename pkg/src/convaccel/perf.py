"""Analytical performance and resource accounting.

Operations are counted as two per multiply-accumulate.  Throughput is
``ops / (cycles / f_clk)``; power is never modelled and always supplied by the
caller.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields

from .addertree import Variant, build, cost
from .errors import ZeroCycleError
from .tensors import ConvGeometry

DEFAULT_CLOCK_HZ = 100e6


def count_layer_ops(geometry: ConvGeometry, M: int, N: int, K: int | None = None):
    """(multiplications, addition inputs) of one convolution layer.

    Every output element needs N*K*K products and sums N*K*K + 1 numbers (the
    extra one is the bias).
    """
    G = geometry.out_height * geometry.out_width
    taps = K * K if K is not None else geometry.kernel_height * geometry.kernel_width
    return M * G * N * taps, M * G * (N * taps + 1)


@dataclass(frozen=True)
class LayerStats:
    name: str
    in_channels: int
    in_height: int
    in_width: int
    out_channels: int
    out_height: int
    out_width: int
    kernel: int
    stride_h: int
    stride_w: int
    variant: str
    pn: int
    pm: int
    passes_per_window: int
    macs: int
    stream_cycles: int
    stall_cycles: int
    drain_cycles: int
    tree_depth: int
    multipliers: int
    tree_adders: int
    tree_registers: int
    accumulators: int
    buffer_registers: int

    @property
    def ops(self) -> int:
        return 2 * self.macs

    @property
    def cycles(self) -> int:
        return self.stream_cycles + self.stall_cycles + self.drain_cycles


LAYER_COLUMNS = tuple(f.name for f in fields(LayerStats)) + ("ops", "cycles", "gops")


def gops(stats, clock_hz: float = DEFAULT_CLOCK_HZ) -> float:
    """Giga-operations per second for anything with ``macs`` and ``cycles``."""
    if stats.cycles <= 0:
        raise ZeroCycleError("cannot compute throughput over zero cycles")
    return 2 * stats.macs / (stats.cycles / clock_hz) / 1e9


@dataclass(frozen=True)
class NetworkStats:
    """Totals over the simulated convolution layers.

    Pooling, activation and the dense layer run on the reference path and are
    not cycle-counted; their multiply-accumulates are reported separately.
    """
    layers: tuple
    dense_macs: int = 0

    @property
    def macs(self) -> int:
        return sum(s.macs for s in self.layers)

    @property
    def cycles(self) -> int:
        return sum(s.cycles for s in self.layers)

    def latency_s(self, clock_hz: float = DEFAULT_CLOCK_HZ) -> float:
        return self.cycles / clock_hz


@dataclass(frozen=True)
class EfficiencyReport:
    gops: float
    power_watts: float
    gops_per_watt: float


def efficiency(gops_value: float, power_watts: float) -> EfficiencyReport:
    if power_watts <= 0:
        raise ValueError(f"power must be positive, got {power_watts}")
    return EfficiencyReport(gops_value, power_watts, gops_value / power_watts)


def layer_rows(stats_list, clock_hz: float = DEFAULT_CLOCK_HZ):
    for s in stats_list:
        row = asdict(s)
        row.update(ops=s.ops, cycles=s.cycles, gops=repr(gops(s, clock_hz)))
        yield row


def write_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def layer_stats_csv(stats_list, clock_hz: float = DEFAULT_CLOCK_HZ) -> str:
    return write_csv(LAYER_COLUMNS, layer_rows(stats_list, clock_hz))


TREE_COMPARE_COLUMNS = (
    "eta",
    "classic_adders", "classic_registers", "classic_cycles",
    "improved_adders", "improved_registers", "improved_cycles",
    "adder_saving_pct", "register_saving_pct",
)


def compare_trees(etas):
    etas = list(etas)
    if not etas:
        raise ValueError("empty eta range")
    rows = []
    for eta in etas:
        c = cost(build(Variant.CLASSIC, eta))
        i = cost(build(Variant.IMPROVED, eta))
        adder_saving = 100.0 * (c.adders - i.adders) / c.adders if c.adders else 0.0
        rows.append({
            "eta": eta,
            "classic_adders": c.adders, "classic_registers": c.registers,
            "classic_cycles": c.cycles,
            "improved_adders": i.adders, "improved_registers": i.registers,
            "improved_cycles": i.cycles,
            "adder_saving_pct": f"{adder_saving:.4f}",
            "register_saving_pct": f"{100.0 * (c.registers - i.registers) / c.registers:.4f}",
        })
    return rows


def compare_trees_csv(etas) -> str:
    return write_csv(TREE_COMPARE_COLUMNS, compare_trees(etas))
