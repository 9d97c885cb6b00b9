"""Print the line-buffer timing anchors for one plane size.

    python scripts/window_timing.py --height 13 --width 13 --kernel 6
"""
import argparse

import numpy as np

from convaccel.dataflow import WindowStream, stream_windows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--height", type=int, default=5)
    parser.add_argument("--width", type=int, default=5)
    parser.add_argument("--kernel", type=int, default=3)
    args = parser.parse_args()
    H, W, K = args.height, args.width, args.kernel

    plane = (np.arange(H * W) % 32768).astype(np.int16).reshape(H, W)
    trace, _ = stream_windows(plane, K)
    valid = trace.valid_entries()
    first_row_end = [e for e in valid if e.anchor_row == 0][-1]
    print(f"plane {H}x{W}, kernel {K}")
    print(f"  registers per channel   {WindowStream(K, H, W).storage_cells} "
          f"({K}x{K} window + {K - 1}x{W - K} shift)")
    print(f"  invalid cycles Tu       {trace.tu}")
    print(f"  first window            cycle {valid[0].cycle}")
    print(f"  end of first output row cycle {first_row_end.cycle} (K*W = {K * W})")
    print(f"  last window             cycle {valid[-1].cycle} (H*W = {H * W})")
    print(f"  valid / row-wrap        {len(valid)} / {H * W - trace.tu - len(valid)}")


if __name__ == "__main__":
    main()
