#!/usr/bin/env python3
"""Plot run CSVs produced by the qddlab CLI.

Record CSVs (step,time,entropy,...) get a two-panel figure: log-scale
entropy/Fisher series on the left, backward-difference rates with their
spectral reference lines on the right.  A bls section CSV gets one curve
per snapshot time with the plateau marked.  File kind is sniffed from the
first line.
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


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
            try:
                refs[key] = float(value)
            except ValueError:
                pass
    return refs, np.genfromtxt(path, delimiter=",", names=True, skip_header=nskip)


def is_section(path):
    with open(path) as f:
        return f.readline().startswith("# values along x1")


def plot_records(paths, out):
    fig, (ax_series, ax_rates) = plt.subplots(1, 2, figsize=(11, 4.2))
    ref_styles = (
        ("two_lambda_h_sq", ":"),
        ("two_lambda_star_h_sq", "--"),
    )
    for path in paths:
        refs, data = load_record(path)
        tag = f"lam={refs['lambda']:g}" if "lambda" in refs else path
        (line,) = ax_series.semilogy(data["time"], data["entropy"], label=f"H, {tag}")
        ax_series.semilogy(
            data["time"], data["fisher"], color=line.get_color(), alpha=0.45, label=f"I, {tag}"
        )
        ax_rates.plot(data["time"][1:], data["entropy_rate"][1:], color=line.get_color(), label=tag)
        ax_rates.plot(data["time"][1:], data["fisher_rate"][1:], color=line.get_color(), alpha=0.45)
        for key, style in ref_styles:
            if key in refs:
                ax_rates.axhline(refs[key], color=line.get_color(), ls=style, lw=0.9)
    ax_series.set_xlabel("t")
    ax_series.set_ylabel("entropy / Fisher information")
    ax_series.legend(fontsize=8)
    ax_rates.set_xlabel("t")
    ax_rates.set_ylabel("backward-difference decay rate")
    ax_rates.set_yscale("log")
    ax_rates.legend(fontsize=8, title="refs: dotted (2l_h)^2, dashed (2l*_h)^2")
    fig.tight_layout()
    fig.savefig(out, dpi=160)
    print(f"wrote {out}")


def plot_section(path, out):
    with open(path) as f:
        f.readline()
        names = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    n = len(names) - 1
    x = (np.arange(n) + 0.5) / n
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for row in rows:
        t = float(row[0])
        ax.semilogy(x, [float(v) for v in row[1:]], label=f"t={t:.2e}")
    ax.axhline(1e-4, color="k", ls=":", lw=0.9, label="plateau")
    ax.set_xlabel("x1")
    ax.set_ylabel("u along the mid row")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=160)
    print(f"wrote {out}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv", nargs="+", help="record CSVs, or a single section CSV")
    ap.add_argument("--out", default=None, help="output image (default <first-input>.png)")
    args = ap.parse_args()
    out = args.out or args.csv[0].rsplit(".", 1)[0] + ".png"
    if is_section(args.csv[0]):
        if len(args.csv) > 1:
            ap.error("section plots take exactly one input file")
        plot_section(args.csv[0], out)
    else:
        plot_records(args.csv, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
