#!/usr/bin/env python3
"""Render hit-probability curves from the simulator's CSV output.

Reads the hit-row schema written by `edgecache run` (and optionally the
closed-form schema from `edgecache analytic`), groups rows into one series
per policy, and draws hit probability against the chosen x column. Simulated
series carry 95% error bars; analytic series are dashed. Output is a plain
PNG with no timestamps or tool metadata, so rerunning on the same inputs
reproduces the file byte for byte.
"""

import argparse
import csv
import math
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

SIM_COLUMNS = [
    "policy", "r_b", "n_bs", "gamma", "alpha", "q",
    "hit", "ci95", "requests", "realizations",
]
ANALYTIC_COLUMNS = ["r_b", "n_bs", "policy", "analytic_hit", "gamma", "alpha"]
X_CHOICES = ("n_bs", "gamma", "alpha", "q")
X_LABELS = {
    "n_bs": "mean coverage number",
    "gamma": "popularity exponent",
    "alpha": "cache-to-catalogue ratio",
    "q": "insertion probability",
}
MARKERS = ("o", "s", "^", "d", "v", "*", "P", "X")


class SchemaError(Exception):
    pass


def read_rows(path: str, required: list[str]) -> list[dict]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(
                f"{path}: empty file, expected columns {required}"
            )
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise SchemaError(
                f"{path}: missing columns {missing}, "
                f"found {list(reader.fieldnames)}"
            )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def fnum(text) -> float:
    if text is None or text == "":
        return math.nan
    return float(text)


def build_series(rows: list[dict], x_key: str, y_key: str,
                 ci_key: str | None = None) -> dict[str, list[tuple]]:
    """policy label -> [(x, y, ci)] sorted by x; rows without an x value
    (e.g. a blank q on a non-q policy) are dropped."""
    series: dict[str, list[tuple]] = {}
    for row in rows:
        x = fnum(row[x_key])
        if math.isnan(x):
            continue
        label = row["policy"]
        q = fnum(row.get("q", ""))
        if x_key != "q" and not math.isnan(q):
            label = f"{label} (q={row['q']})"
        ci = fnum(row[ci_key]) if ci_key else math.nan
        series.setdefault(label, []).append((x, fnum(row[y_key]), ci))
    for pts in series.values():
        pts.sort(key=lambda p: p[0])
    if not series:
        raise SchemaError(f"no rows carry a value in column {x_key!r}")
    return series


def render(args) -> int:
    sim = build_series(read_rows(args.csv, SIM_COLUMNS), args.x, "hit", "ci95")
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for i, (label, pts) in enumerate(sim.items()):
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        err = [0.0 if math.isnan(p[2]) else p[2] for p in pts]
        ax.errorbar(
            xs, ys, yerr=err, label=label, marker=MARKERS[i % len(MARKERS)],
            capsize=3, markersize=5, linewidth=1.3,
        )
    if args.analytic:
        an = build_series(
            read_rows(args.analytic, ANALYTIC_COLUMNS), args.x, "analytic_hit"
        )
        for label, pts in an.items():
            ax.plot(
                [p[0] for p in pts], [p[1] for p in pts],
                linestyle="--", linewidth=1.3, label=f"{label} (analytic)",
            )
    ax.set_xlabel(X_LABELS[args.x])
    ax.set_ylabel("hit probability")
    ax.set_ylim(bottom=0.0)
    ax.grid(True, alpha=0.35)
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150, metadata={"Software": None})
    plt.close(fig)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="plot hit-probability curves from edgecache CSV files"
    )
    parser.add_argument("--csv", required=True, help="simulated hit rows")
    parser.add_argument("--analytic", default=None,
                        help="closed-form rows to overlay (dashed)")
    parser.add_argument("--x", required=True, choices=X_CHOICES,
                        help="x-axis column")
    parser.add_argument("--out", required=True, help="output PNG path")
    args = parser.parse_args(argv)
    try:
        return render(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
