#!/usr/bin/env python3
"""Equilibration-rate sweep: run the fourth-order flow for several potential
strengths and compare measured entropy/Fisher decay rates with the spectral
predictions embedded in each CSV."""

import argparse
import sys
from pathlib import Path

import numpy as np

from qddlab.cli import main as cli_main


def load_record(path):
    # leading "# key=value" lines, then a plain CSV header row
    refs = {}
    nskip = 0
    with open(path) as f:
        for line in f:
            if not line.startswith("#"):
                break
            nskip += 1
            key, _, value = line[1:].strip().partition("=")
            refs[key] = float(value)
    return refs, np.genfromtxt(path, delimiter=",", names=True, skip_header=nskip)


def summarize(path):
    refs, data = load_record(path)
    half = len(data) // 2
    return refs, {
        "entropy_rate": float(np.nanmin(data["entropy_rate"][half:])),
        "fisher_rate": float(np.nanmin(data["fisher_rate"][half:])),
    }


def main():
    ap = argparse.ArgumentParser(description="lambda sweep of the decay experiment")
    ap.add_argument("--outdir", default="data/decay", help="output directory (default data/decay)")
    ap.add_argument("--n", default="30", help="cells per direction (default 30)")
    ap.add_argument("--steps", default=None, help="steps per run (default 1000)")
    ap.add_argument(
        "--lambdas", default="1,10,100", help="comma-separated potential strengths"
    )
    args = ap.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for lam in args.lambdas.split(","):
        prefix = outdir / f"decay_lam{lam}"
        argv = [
            "decay",
            "--n", args.n,
            "--lambda", lam,
            "--output-prefix", str(prefix),
        ]
        if args.steps is not None:
            argv += ["--steps", args.steps]
        print(f"running lambda={lam} ...", flush=True)
        rc = cli_main(argv)
        if rc != 0:
            return rc
        paths.append(f"{prefix}.csv")

    # Final-half minima: everything above the (2 lambda*_h)^2 column means the
    # run still carries transient modes; at or slightly below means the step
    # size has pushed the backward-difference rate onto the implicit bias.
    header = f"{'lambda':>8} {'tau':>10} {'(2l_h)^2':>12} {'(2l*_h)^2':>12} {'min dH rate':>12} {'min dI rate':>12}"
    print(header)
    for path in paths:
        refs, mins = summarize(path)
        print(
            f"{refs['lambda']:8g} {refs['tau']:10.2e} {refs['two_lambda_h_sq']:12.2f} "
            f"{refs['two_lambda_star_h_sq']:12.2f} {mins['entropy_rate']:12.2f} "
            f"{mins['fisher_rate']:12.2f}"
        )
    print(f"plot with: python3 scripts/plot_series.py {' '.join(paths)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
