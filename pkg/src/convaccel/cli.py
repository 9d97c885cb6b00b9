"""Command-line harness: ``convaccel {layer,network,tree,trace}``.

Every subcommand writes CSV reports plus a ``summary.txt`` into ``--out``.
Exit codes: 0 ok, 2 config, 3 missing file, 4 shape/geometry, 5 tensor format.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import reference as ref
from .addertree import Variant, build, cost_table_csv
from .config import RunConfig, TraceSpec, build_input, build_model, load_config
from .dataflow import PipelineConfig, TRACE_COLUMNS, run_layer, select_strided, stream_windows
from .errors import ConfigError, ConvAccelError, ShapeChainError
from .fixedpoint import to_real_array
from .network import ConvLayer, run_network, run_network_reference
from .perf import compare_trees_csv, efficiency, gops, layer_stats_csv, write_csv
from .tensors import encode_tensor

COMMANDS = ("layer", "network", "tree", "trace")


@dataclass
class RunResult:
    reports: dict = field(default_factory=dict)   # file name -> str | bytes
    outputs: dict = field(default_factory=dict)   # variant -> output FeatureMap / scores

    def write(self, out_dir) -> list:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, body in self.reports.items():
            path = out_dir / name
            if isinstance(body, bytes):
                path.write_bytes(body)
            else:
                path.write_text(body)
            written.append(path)
        return written


def _pipeline(cfg: RunConfig, variant, stride=1) -> PipelineConfig:
    return PipelineConfig(cfg.pn, cfg.pm, variant, stride, stride)


def _header(cfg: RunConfig, command: str) -> list:
    return [f"command: {command}",
            f"seed: {cfg.seed}",
            f"clock_mhz: {cfg.clock_mhz!r}",
            f"variants: {', '.join(v.value for v in cfg.variants)}",
            f"pn: {'full' if cfg.pn is None else cfg.pn}",
            f"pm: {'full' if cfg.pm is None else cfg.pm}"]


def _pool(cfg: RunConfig, fn, items):
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        return list(pool.map(fn, items))


def run_layer_command(cfg: RunConfig) -> RunResult:
    model = build_model(cfg)
    first = next((l for l in model.layers if isinstance(l, ConvLayer)), None)
    if first is None:
        raise ShapeChainError(0, "network", "no convolution layer to simulate")
    x = build_input(cfg)
    golden = ref.conv_reference(x, first.kernels, first.stride, first.stride)

    def one(variant):
        cfg_v = _pipeline(cfg, variant, first.stride)
        cfg_v = replace(cfg_v, pn=None if cfg.pn is None else min(cfg.pn, first.kernels.channels),
                        pm=None if cfg.pm is None else min(cfg.pm, first.kernels.kernels))
        return run_layer(x, first.kernels, cfg_v, name=first.name)

    runs = _pool(cfg, one, cfg.variants)
    res = RunResult()
    lines = _header(cfg, "layer") + [f"layer: {first.name}", f"input: {list(x.shape)}"]
    for variant, (out, stats) in zip(cfg.variants, runs):
        res.outputs[variant.value] = out
        res.reports[f"layer_output_{variant.value}.ct16"] = encode_tensor(out)
        lines += [f"[{variant.value}] output {list(out.shape)}  cycles {stats.cycles}  "
                  f"gops {gops(stats, cfg.clock_hz):.6f}  matches reference: {out == golden}"]
    res.reports["layer_stats.csv"] = layer_stats_csv([s for _, s in runs], cfg.clock_hz)
    res.reports["summary.txt"] = "\n".join(lines) + "\n"
    return res


NETWORK_TOTAL_COLUMNS = ("variant", "conv_macs", "dense_macs", "conv_ops", "cycles",
                         "latency_s", "gops", "power_watts", "gops_per_watt")


def run_network_command(cfg: RunConfig) -> RunResult:
    model = build_model(cfg)
    x = build_input(cfg)
    golden, _ = run_network_reference(x, model)

    runs = _pool(cfg, lambda v: run_network(x, model, _pipeline(cfg, v)), cfg.variants)
    res = RunResult()
    lines = _header(cfg, "network") + [
        f"input: {list(x.shape)}",
        f"parameters: {' / '.join(map(str, model.parameter_counts()))}",
        f"layers: {' -> '.join(l.name for l in model.layers)}",
    ]
    stats_rows, totals, scores = [], [], []
    for variant, (out, stats, _) in zip(cfg.variants, runs):
        res.outputs[variant.value] = out
        stats_rows.extend(stats.layers)
        g = gops(stats, cfg.clock_hz)
        eff = efficiency(g, cfg.power_watts) if cfg.power_watts else None
        totals.append({
            "variant": variant.value, "conv_macs": stats.macs, "dense_macs": stats.dense_macs,
            "conv_ops": 2 * stats.macs, "cycles": stats.cycles,
            "latency_s": repr(stats.latency_s(cfg.clock_hz)), "gops": repr(g),
            "power_watts": "" if eff is None else repr(eff.power_watts),
            "gops_per_watt": "" if eff is None else repr(eff.gops_per_watt),
        })
        for cls, raw in enumerate(out):
            scores.append({"variant": variant.value, "class": cls, "raw": int(raw),
                           "value": repr(float(to_real_array(raw)))})
        lines.append(f"[{variant.value}] cycles {stats.cycles}  gops {g:.6f}  "
                     f"argmax {int(np.argmax(out))}  matches reference: {np.array_equal(out, golden)}"
                     + ("" if eff is None else f"  gops/W {eff.gops_per_watt:.4f}"))
    res.reports["network_stats.csv"] = layer_stats_csv(stats_rows, cfg.clock_hz)
    res.reports["network_totals.csv"] = write_csv(NETWORK_TOTAL_COLUMNS, totals)
    res.reports["scores.csv"] = write_csv(("variant", "class", "raw", "value"), scores)
    res.reports["summary.txt"] = "\n".join(lines) + "\n"
    return res


def run_tree_command(cfg: RunConfig) -> RunResult:
    res = RunResult()
    etas = cfg.tree_etas
    res.reports["tree_compare.csv"] = compare_trees_csv(etas)
    res.reports["tree_costs.csv"] = cost_table_csv(etas)
    lines = [f"command: tree", f"eta: {etas[0]}..{etas[-1]}"]
    if cfg.tree_dump:
        for variant in cfg.variants:
            text = build(variant, cfg.tree_dump).dump()
            res.reports[f"tree_dump_{variant.value}_eta{cfg.tree_dump}.txt"] = text
            lines.append(text.rstrip().splitlines()[-1].replace("cost", f"[{variant.value}] eta={cfg.tree_dump}"))
    res.reports["summary.txt"] = "\n".join(lines) + "\n"
    return res


def run_trace_command(cfg: RunConfig) -> RunResult:
    t: TraceSpec = cfg.trace
    plane = (np.arange(t.height * t.width) % 32768).astype(np.int16).reshape(t.height, t.width)
    trace, _ = stream_windows(plane, t.kernel)
    res = RunResult()
    res.reports["trace.csv"] = trace.to_csv()
    kept = select_strided(trace, t.stride, t.stride)
    if t.stride > 1:
        rows = [dict(zip(TRACE_COLUMNS, (e.cycle, e.ordinal, int(e.valid), e.anchor_row, e.anchor_col)))
                for e in kept]
        res.reports["trace_strided.csv"] = write_csv(TRACE_COLUMNS, rows)
    valid = trace.valid_entries()
    res.reports["summary.txt"] = "\n".join([
        "command: trace",
        f"plane: {t.height}x{t.width}  kernel: {t.kernel}  stride: {t.stride}",
        f"invalid cycles (Tu): {trace.tu}",
        f"first valid window: cycle {valid[0].cycle}",
        f"last valid window: cycle {valid[-1].cycle}",
        f"total cycles: {trace.total_cycles}",
        f"valid stride-1 windows: {len(valid)}",
        f"windows on stride lattice: {len(kept)}",
    ]) + "\n"
    return res


_RUNNERS = {
    "layer": run_layer_command,
    "network": run_network_command,
    "tree": run_tree_command,
    "trace": run_trace_command,
}


def run_config(path_or_cfg, command: str = "network", **overrides) -> RunResult:
    """Load a config (path or RunConfig), apply overrides, run one subcommand."""
    cfg = path_or_cfg if isinstance(path_or_cfg, RunConfig) else (
        load_config(path_or_cfg) if path_or_cfg is not None else RunConfig())
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if "variants" in overrides:
        overrides["variants"] = tuple(Variant(v) for v in overrides["variants"])
    cfg = replace(cfg, **overrides)
    # reject bad values before any work
    PipelineConfig(cfg.pn, cfg.pm)
    for name in ("clock_mhz", "power_watts"):
        v = getattr(cfg, name)
        if v is not None and v <= 0:
            raise ConfigError(f"must be positive, got {v}", field=name)
    return _RUNNERS[command](cfg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convaccel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="YAML run configuration")
        p.add_argument("--out", type=Path, default=Path("out"), help="report directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--clock-mhz", type=float)
        p.add_argument("--variant", action="append", choices=[v.value for v in Variant],
                       help="adder tree variant; repeat for both")
        p.add_argument("--pn", type=int, help="parallel input channels")
        p.add_argument("--pm", type=int, help="parallel output channels")
        p.add_argument("--power-watts", type=float, help="board power for GOPS/W")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = run_config(args.config, args.command, seed=args.seed, clock_mhz=args.clock_mhz,
                            variants=args.variant, pn=args.pn, pm=args.pm,
                            power_watts=args.power_watts)
        for path in result.write(args.out):
            print(path)
        print(result.reports["summary.txt"], end="")
    except ConvAccelError as exc:
        category = type(exc).__name__.removesuffix("Error").lower()
        print(f"error[{category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
