#!/usr/bin/env python3
"""Turn the CLI's CSV outputs into figures.

Usage:
    python3 tools/plot_figures.py out/figure1 figure1.png   # kernel curves
    python3 tools/plot_figures.py out/figure2 figure2.png   # coupled paths
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_csv(path: Path):
    rows = []
    header = None
    for line in path.read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append([float(c) if c else np.nan for c in line.split(",")])
    return header, np.array(rows)


def plot_kernel_curves(out_dir: Path, target: Path):
    header, data = read_csv(out_dir / "kernel_curves.csv")
    fig, ax = plt.subplots(figsize=(7, 4))
    t = data[:, 0]
    for j, name in enumerate(header[1:], start=1):
        style = "-" if name == "phi" else "--"
        ax.plot(t, data[:, j], style, label=name)
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("kernel value")
    ax.legend()
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    print(f"wrote {target}")


def plot_paths(out_dir: Path, target: Path):
    files = sorted(out_dir.glob("paths_*.csv"))
    if not files:
        sys.exit(f"no paths_*.csv under {out_dir}")
    fig, (ax_x, ax_l) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for f in files:
        label = f.stem.replace("paths_", "")
        _, data = read_csv(f)
        ax_x.plot(data[:, 0], data[:, 1], lw=0.8, label=label)
        ax_l.plot(data[:, 0], data[:, 2], lw=0.8, label=label)
    ax_x.set_ylabel("X")
    ax_l.set_ylabel("lambda")
    ax_l.set_xlabel("t")
    ax_x.legend()
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    print(f"wrote {target}")


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    out_dir = Path(sys.argv[1])
    target = Path(sys.argv[2])
    if (out_dir / "kernel_curves.csv").exists():
        plot_kernel_curves(out_dir, target)
    else:
        plot_paths(out_dir, target)


if __name__ == "__main__":
    main()
