#!/usr/bin/env python3
"""Emit a GAUW weight file: random-but-valid, or the built-in demo set.

Random weights exercise readers and the forward pass on arbitrary
topologies; demo weights are the deterministic set the pipeline uses when
no file is given, written out here so they can be inspected or shipped.

Usage:
  python scripts/make_random_weights.py --out weights.gauw --seed 7
  python scripts/make_random_weights.py --out tiny.gauw --channels 2,4
  python scripts/make_random_weights.py --out demo.gauw --demo
"""

import argparse

import numpy as np

from visiris.network import (
    demo_weights,
    param_count,
    random_weights,
    topology_summary,
    write_weights,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output .gauw path")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--channels", default="64,128,256,512",
        help="comma-separated encoder output channels, shallowest first",
    )
    parser.add_argument("--demo", action="store_true",
                        help="write the built-in demonstration weights instead")
    args = parser.parse_args()

    channels = tuple(int(c) for c in args.channels.split(","))
    if args.demo:
        w = demo_weights(encoder_channels=channels)
    else:
        w = random_weights(np.random.default_rng(args.seed),
                           encoder_channels=channels)
    write_weights(w, args.out)
    print(topology_summary(w))
    print(f"wrote {args.out} ({param_count(w)} parameters)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
