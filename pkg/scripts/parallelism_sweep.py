"""Simulated throughput of the demo network across input/output channel parallelism.

    python scripts/parallelism_sweep.py --clock-mhz 100 --power-watts 9.711
"""
import argparse
import csv
import sys

from convaccel.addertree import Variant
from convaccel.dataflow import PipelineConfig
from convaccel.network import mnist_model, random_input, run_network, run_network_reference
from convaccel.perf import efficiency, gops

SWEEP = [(1, 1), (1, 5), (1, 15), (5, 5), (5, 20), (15, 10), (None, None)]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--clock-mhz", type=float, default=100.0)
    parser.add_argument("--power-watts", type=float)
    args = parser.parse_args()

    model = mnist_model(args.seed)
    x = random_input(args.seed + 1)
    golden, _ = run_network_reference(x, model)
    clock = args.clock_mhz * 1e6

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["variant", "pn", "pm", "cycles", "latency_us", "gops", "gops_per_watt", "exact"])
    for variant in Variant:
        for pn, pm in SWEEP:
            scores, stats, _ = run_network(x, model, PipelineConfig(pn, pm, variant))
            g = gops(stats, clock)
            eff = efficiency(g, args.power_watts).gops_per_watt if args.power_watts else ""
            writer.writerow([variant.value, pn or "full", pm or "full", stats.cycles,
                             f"{stats.latency_s(clock) * 1e6:.2f}", f"{g:.3f}",
                             f"{eff:.3f}" if eff != "" else "", (scores == golden).all()])


if __name__ == "__main__":
    main()
