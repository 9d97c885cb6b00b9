"""Classic vs improved adder-tree cost over a range of input counts.

    python scripts/tree_cost_sweep.py --max-eta 256 --out tree_sweep.csv
"""
import argparse
from pathlib import Path

from convaccel.perf import compare_trees, compare_trees_csv


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--max-eta", type=int, default=256)
    parser.add_argument("--out", type=Path, default=Path("tree_sweep.csv"))
    args = parser.parse_args()

    etas = range(1, args.max_eta + 1)
    args.out.write_text(compare_trees_csv(etas))
    print(f"wrote {args.out}")

    # kernel-sized trees, K*K inputs
    print(f"{'K':>3} {'eta':>4}  classic(add,reg,cyc)  improved(add,reg,cyc)  reg saving")
    for row in compare_trees([k * k for k in range(1, 13)]):
        k = int(round(row["eta"] ** 0.5))
        print(f"{k:>3} {row['eta']:>4}  "
              f"({row['classic_adders']:>3},{row['classic_registers']:>4},{row['classic_cycles']:>2})"
              f"{'':>8}({row['improved_adders']:>3},{row['improved_registers']:>4},{row['improved_cycles']:>2})"
              f"{'':>8}{row['register_saving_pct']:>7}%")


if __name__ == "__main__":
    main()
