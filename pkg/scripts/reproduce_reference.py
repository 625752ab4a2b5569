#!/usr/bin/env python3
"""Run the bundled reference experiment end to end.

Equivalent to ``loadsysid reproduce`` with the default configuration;
writes the artifact bundle into the requested directory and prints the
summary.
"""

import argparse
from pathlib import Path

from loadsysid.config import default_config_text, load_config
from loadsysid.pipeline import run_reproduce


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/reference")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    cfg = load_config(default_config_text(), seed_override=args.seed)
    run_reproduce(cfg, args.out)
    print((Path(args.out) / "summary.txt").read_text())


if __name__ == "__main__":
    main()
