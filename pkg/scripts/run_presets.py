#!/usr/bin/env python3
"""Run figure presets into one output directory per preset.

    python3 scripts/run_presets.py out/ fig2 fig3 fig7
    python3 scripts/run_presets.py out/            # every preset
"""

import argparse
import time
from pathlib import Path

from flyingatom.runner import PRESETS, run_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir")
    ap.add_argument("names", nargs="*", help=f"presets to run (default all): {', '.join(sorted(PRESETS))}")
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()
    unknown = sorted(set(args.names) - set(PRESETS))
    if unknown:
        ap.error(f"unknown presets {unknown}")
    for name in args.names or sorted(PRESETS):
        t0 = time.perf_counter()
        m = run_preset(name, Path(args.outdir) / name, workers=args.workers)
        print(f"{name:6s} {m.status:8s} {time.perf_counter() - t0:8.1f}s  {PRESETS[name].description}")


if __name__ == "__main__":
    main()
