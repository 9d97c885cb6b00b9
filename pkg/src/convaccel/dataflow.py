"""Cycle-accurate model of the convolution datapath.

One input sample per channel enters the line buffer each clock.  The line
buffer is a K x K window register plus a (K-1) x (W-K) shift register; after the
first ``Tu = (K-1)*W + K - 1`` cycles the window register holds a new window
every cycle.  Windows that straddle the seam between two image rows are flagged
invalid rather than skipped, so the stream never stalls for them.

Valid windows on the stride lattice are handed to Pm x Pn multiply-add trees,
whose per-channel partial sums are folded into an M-register accumulator bank
one input channel at a time; the bias is added last and each output is narrowed
once.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .addertree import Variant, build, cost, reduce
from .errors import ConfigError, GeometryError, ShapeError, StreamExhaustedError
from .fixedpoint import narrow_array, widen_array
from .perf import LayerStats
from .tensors import FeatureMap, KernelSet, geometry_for


class WindowStream:
    """Line-buffer state for ``channels`` planes advancing in lockstep.

    ``window_buffer[c, r, 0]`` is the newest sample of window row ``r``; columns
    grow older to the right.  :meth:`window` returns the image-oriented view.
    """

    def __init__(self, K: int, H: int, W: int, channels: int = 1, kernel_width: int | None = None):
        kw = K if kernel_width is None else kernel_width
        if K < 1 or kw < 1 or K > H or kw > W:
            raise GeometryError(f"kernel {K}x{kw} does not fit a {H}x{W} plane")
        self.K, self.kernel_width, self.H, self.W = K, kw, H, W
        self.channels = channels
        self.window_buffer = np.zeros((channels, K, kw), dtype=np.int16)
        self.shift_buffer = np.zeros((channels, K - 1, W - kw), dtype=np.int16)
        self.cycle = 0

    @property
    def tu(self) -> int:
        """Number of leading cycles whose window contents are invalid."""
        return (self.K - 1) * self.W + self.kernel_width - 1

    @property
    def total_cycles(self) -> int:
        return self.H * self.W

    @property
    def storage_cells(self) -> int:
        """Registers per channel: K*K window plus (K-1)*(W-K) shift cells."""
        return self.window_buffer[0].size + self.shift_buffer[0].size

    @property
    def exhausted(self) -> bool:
        return self.cycle >= self.total_cycles

    def step(self, next_input) -> "WindowStream":
        """Advance one clock; all five register transfers read pre-clock state."""
        if self.exhausted:
            raise StreamExhaustedError(f"plane of {self.total_cycles} samples already consumed")
        K, kw = self.K, self.kernel_width
        wb, sb = self.window_buffer, self.shift_buffer
        new_wb = np.empty_like(wb)
        new_sb = np.empty_like(sb)
        # window rows shift right; the sample enters the bottom row, first column
        new_wb[:, :, 1:] = wb[:, :, :-1]
        new_wb[:, K - 1, 0] = next_input
        if sb.shape[2]:
            # window rows 2..K spill into the shift rows, which shift right and
            # refill window rows 1..K-1
            new_sb[:, :, 0] = wb[:, 1:, kw - 1]
            new_sb[:, :, 1:] = sb[:, :, :-1]
            new_wb[:, :K - 1, 0] = sb[:, :, -1]
        else:
            new_wb[:, :K - 1, 0] = wb[:, 1:, kw - 1]
        self.window_buffer, self.shift_buffer = new_wb, new_sb
        self.cycle += 1
        return self

    @property
    def position(self):
        """(row, col) of the newest sample, 0-based; None before the first cycle."""
        if self.cycle == 0:
            return None
        return divmod(self.cycle - 1, self.W)

    @property
    def valid(self) -> bool:
        pos = self.position
        return pos is not None and pos[0] >= self.K - 1 and pos[1] >= self.kernel_width - 1

    @property
    def anchor(self):
        """Top-left (row, col) of the held window, or None while invalid."""
        if not self.valid:
            return None
        r, c = self.position
        return r - self.K + 1, c - self.kernel_width + 1

    def window(self) -> np.ndarray:
        return self.window_buffer[:, :, ::-1].copy()


@dataclass(frozen=True)
class TraceEntry:
    cycle: int
    ordinal: int        # 1-based index among valid stride-1 windows, 0 if invalid
    valid: bool
    anchor_row: int     # -1 if invalid
    anchor_col: int


TRACE_COLUMNS = ("cycle", "window_ordinal", "valid", "anchor_row", "anchor_col")


@dataclass(frozen=True)
class CycleTrace:
    K: int
    H: int
    W: int
    entries: tuple

    @property
    def total_cycles(self) -> int:
        return len(self.entries)

    @property
    def tu(self) -> int:
        return (self.K - 1) * self.W + self.K - 1

    def valid_entries(self):
        return [e for e in self.entries if e.valid]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for e in self.entries:
            writer.writerow((e.cycle, e.ordinal, int(e.valid), e.anchor_row, e.anchor_col))
        return buf.getvalue()


def stream_windows(plane, K: int):
    """Stream a plane through the line buffer.

    Returns ``(trace, windows)``: ``trace`` has one entry per input cycle, and
    ``windows`` maps each cycle after ``Tu`` to the image-oriented contents of
    the window register (``[K, K]`` for a 2-D plane, ``[C, K, K]`` for 3-D).
    """
    p = np.asarray(plane)
    squeeze = p.ndim == 2
    if squeeze:
        p = p[None]
    if p.ndim != 3:
        raise ShapeError(f"plane must be 2-D or 3-D, got shape {p.shape}")
    C, H, W = p.shape
    ws = WindowStream(K, H, W, channels=C)
    flat = p.reshape(C, H * W)
    Wo = W - K + 1
    entries, windows = [], {}
    for t in range(H * W):
        ws.step(flat[:, t])
        if ws.valid:
            r, c = ws.anchor
            entries.append(TraceEntry(ws.cycle, r * Wo + c + 1, True, r, c))
        else:
            entries.append(TraceEntry(ws.cycle, 0, False, -1, -1))
        if ws.cycle > ws.tu:
            win = ws.window()
            windows[ws.cycle] = win[0] if squeeze else win
    return CycleTrace(K, H, W, tuple(entries)), windows


def select_strided(trace, Hs: int, Ws: int):
    """Keep valid windows whose anchor lies on the (Hs, Ws) stride lattice."""
    if Hs < 1 or Ws < 1:
        raise GeometryError(f"strides must be >= 1, got ({Hs}, {Ws})")
    entries = trace.entries if isinstance(trace, CycleTrace) else trace
    return [e for e in entries
            if e.valid and e.anchor_row % Hs == 0 and e.anchor_col % Ws == 0]


@dataclass(frozen=True)
class PipelineConfig:
    """Parallelism and tree choice.  ``pn``/``pm`` of None mean full (N / M)."""
    pn: int | None = None
    pm: int | None = None
    variant: Variant = Variant.IMPROVED
    stride_h: int = 1
    stride_w: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        for name in ("pn", "pm"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1, got {v}", field=name)
        for name in ("stride_h", "stride_w"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}", field=name)

    def resolve(self, N: int, M: int):
        pn = N if self.pn is None else self.pn
        pm = M if self.pm is None else self.pm
        if pn > N:
            raise ConfigError(f"pn={pn} exceeds the {N} input channels", field="pn")
        if pm > M:
            raise ConfigError(f"pm={pm} exceeds the {M} output channels", field="pm")
        return pn, pm


class AccumulatorBank:
    """M accumulators, each folding in one input channel's partial sum at a time."""

    def __init__(self, M: int, N: int):
        self.M, self.N = M, N
        self.registers = np.zeros(M, dtype=np.int64)
        self.channel = np.zeros(M, dtype=np.int64)
        self.biased = False

    def reset(self):
        self.registers[:] = 0
        self.channel[:] = 0
        self.biased = False

    def accumulate(self, m0: int, n0: int, partials: np.ndarray):
        """Add ``partials[j, i]`` = a_{m0+j, n0+i} into registers m0.., channel by channel."""
        pm, pn = partials.shape
        rows = slice(m0, m0 + pm)
        if np.any(self.channel[rows] != n0):
            raise RuntimeError(f"accumulators {m0}..{m0 + pm - 1} not at channel {n0}")
        for i in range(pn):
            self.registers[rows] += partials[:, i]
        self.channel[rows] += pn

    def add_bias(self, bias):
        if np.any(self.channel != self.N):
            raise RuntimeError("bias applied before all input channels were accumulated")
        self.registers += widen_array(bias)
        self.biased = True


def run_layer(x: FeatureMap, k: KernelSet, cfg: PipelineConfig = PipelineConfig(), name: str = "conv"):
    """Simulate one convolution layer; returns ``(output, LayerStats)``."""
    geom = geometry_for(x, k, cfg.stride_h, cfg.stride_w)
    N, H, W = x.shape
    M, _, Hk, Wk = k.weights.shape
    pn, pm = cfg.resolve(N, M)
    Hs, Ws = cfg.stride_h, cfg.stride_w

    schedule = build(cfg.variant, Hk * Wk)
    tree = cost(schedule)
    stream = WindowStream(Hk, H, W, channels=N, kernel_width=Wk)
    bank = AccumulatorBank(M, N)
    weights = k.weights.reshape(M, N, Hk * Wk).astype(np.int64)
    samples = x.data.reshape(N, H * W)
    acc = np.zeros((M, geom.out_height, geom.out_width), dtype=np.int64)

    passes = -(-N // pn) * -(-M // pm)
    windows_done = 0
    for t in range(H * W):
        stream.step(samples[:, t])
        if not stream.valid:
            continue
        r, c = stream.anchor
        if r % Hs or c % Ws:
            continue
        win = stream.window().reshape(N, Hk * Wk).astype(np.int64)
        bank.reset()
        for n0 in range(0, N, pn):
            for m0 in range(0, M, pm):
                # pm x pn trees, each fed by K*K multipliers
                products = weights[m0:m0 + pm, n0:n0 + pn] * win[None, n0:n0 + pn]
                bank.accumulate(m0, n0, reduce(schedule, products))
        bank.add_bias(k.bias)
        acc[:, r // Hs, c // Ws] = bank.registers
        windows_done += 1

    assert windows_done == geom.out_height * geom.out_width
    stats = LayerStats(
        name=name,
        in_channels=N, in_height=H, in_width=W,
        out_channels=M, out_height=geom.out_height, out_width=geom.out_width,
        kernel=Hk, stride_h=Hs, stride_w=Ws,
        variant=cfg.variant.value, pn=pn, pm=pm,
        passes_per_window=passes,
        macs=M * N * Hk * Wk * windows_done,
        stream_cycles=H * W,
        # the stream holds while a window needs more than one pass through the trees
        stall_cycles=windows_done * (passes - 1),
        # tree layers + accumulate + bias
        drain_cycles=tree.cycles + 2,
        tree_depth=tree.cycles,
        multipliers=pm * pn * Hk * Wk,
        tree_adders=pm * pn * tree.adders,
        tree_registers=pm * pn * tree.registers,
        accumulators=M,
        buffer_registers=N * stream.storage_cells,
    )
    return FeatureMap(narrow_array(acc)), stats
