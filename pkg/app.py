"""
Main entry point for the sliding windows regression tool.

Usage:
    python app.py fit data.csv --k-max 3 --criterion bic --out-dir out
    python app.py predict out/model.json data.csv --out-dir out
    python app.py simulate --k 2 --alpha 0.5 --out-dir sim
    python app.py study --grid grid.json --out-dir study
    python app.py evaluate out/report.json data.csv --split 0.75

Configuration defaults live in config.py; every subcommand prints its options with --help.
"""

import sys

from swr.cli import main

if __name__ == '__main__':
    sys.exit(main())
