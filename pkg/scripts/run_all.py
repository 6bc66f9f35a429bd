"""Run every CLI subcommand with reproducible output into one directory.

    python3 scripts/run_all.py --out runs/all
"""
import argparse
import sys
from pathlib import Path

from nonlocality.cli import main as cli_main

RUNS = {
    "epr": ["epr", "--trials", "20000"],
    "epr_random3": ["epr", "--trials", "20000", "--dim", "3", "--observable", "random"],
    "partner": ["partner"],
    "partner_random4": ["partner", "--operator", "random", "--dim", "4"],
    "ks_peres33": ["ks"],
    "mermin": ["mermin"],
    "bohm_context": ["bohm", "context", "--z0", "0.5"],
    "bohm_pair": ["bohm", "pair", "--z0", "0.5", "--proc", "reversed"],
    "bohm_ensemble": ["bohm", "ensemble", "--n", "100000"],
    "report": ["report"],
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/all")
    ap.add_argument("--seed", default="0")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = []
    for name, cmd in RUNS.items():
        extra = ["--seed", args.seed, "--reproducible", "--out", str(out / f"{name}.json")]
        if name == "bohm_context":
            extra += ["--data-dir", str(out / "bohm_context")]
        stdout, sys.stdout = sys.stdout, open(out / f"{name}.stdout", "w")
        try:
            code = cli_main(cmd + extra)
        finally:
            sys.stdout.close()
            sys.stdout = stdout
        print(f"{name:16s} exit {code}")
        if code:
            failed.append(name)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
