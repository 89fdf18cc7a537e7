#!/usr/bin/env python3
"""
Desk Study: Simulation Acceptance Grid
========================================

This script runs the desk-scale simulation grid and checks its outcome:
- Three sampled truth models for each of 1, 2 and 3 windows
- Noise levels 0.05 and 0.5 with white noise, 3000 points, 75/25 split
- Mean combined-kernel overlap per number of true windows
- Test R^2 against the theoretical bound of each cell
- Share of cells where BIC selected the true number of windows

Usage:
  python scripts/desk_study.py --out-dir desk_study
  python scripts/desk_study.py --ar    # adds AR(1) phi=0.5 cells with the correction

Notes:
- Writes study.csv and study_summary.json to the output directory.
- Returns 1 when a check fails.
"""

import sys
import argparse
from pathlib import Path

# Ensure project root is on sys.path so imports like `swr.*` work when running directly
PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from swr.sim import DESK_GRID, ErrorProcess, GridSpec, StudyConfig, run_study
from swr.logging import activity_log
from config import STUDY_WORKERS

MIN_OVERLAP = {1: 0.95, 2: 0.95, 3: 0.90}
R2_SLACK_BELOW = 0.05
R2_SLACK_ABOVE = 0.03


def check(report) -> int:
    """Prints one line per check and returns the number of failed checks."""
    frame = report.frame()
    ok = frame[frame["error"].isna()]
    failures = int(len(frame) - len(ok))
    if failures:
        print(f"FAIL  {failures} cells raised errors")

    for k_gt, group in ok.groupby("k_gt"):
        overlap = float(group["overlap"].mean())
        threshold = MIN_OVERLAP.get(int(k_gt), 0.90)
        status = "ok  " if overlap >= threshold else "FAIL"
        failures += status == "FAIL"
        print(f"{status}  k_gt={k_gt}: mean overlap {overlap:.4f} (needs {threshold})")

        correct = float((group["delta_k"] == 0).mean())
        print(f"info  k_gt={k_gt}: correct k in {correct:.0%} of cells")

    gap = ok["r2_bound"] - ok["r2"]
    too_low = int((gap > R2_SLACK_BELOW).sum())
    too_high = int((gap < -R2_SLACK_ABOVE).sum())
    status = "ok  " if too_low == 0 and too_high == 0 else "FAIL"
    failures += status == "FAIL"
    print(f"{status}  test R^2: {too_low} cells more than {R2_SLACK_BELOW} below the bound, "
          f"{too_high} more than {R2_SLACK_ABOVE} above")
    return failures


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the desk-scale simulation grid")
    parser.add_argument("--out-dir", default=PROJECT_ROOT / "desk_study")
    parser.add_argument("--workers", type=int, default=STUDY_WORKERS)
    parser.add_argument("--ar", action="store_true", help="Also run AR(1) noise cells with phi=0.5")
    args = parser.parse_args()

    grid = DESK_GRID
    if args.ar:
        grid = GridSpec.from_dict({**DESK_GRID.to_dict(),
                                   "processes": [ErrorProcess().to_dict(), ErrorProcess.ar1(0.5).to_dict()]})

    report = run_study(grid.cells(), StudyConfig(workers=args.workers), grid)
    paths = report.write(args.out_dir)
    failures = check(report)
    status = 2 if failures else 3
    activity_log(f"Desk study finished with {failures} failed checks, rows in {paths['rows']}", status)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
