"""Render RMSE convergence tables into log-log figures.

Consumes the delimited tables the experiment harness emits (fixed header
``method,family,nu,N,R,rmse,c_ref,c_ref_provenance,seed0``) and draws one
log2-log2 panel per (sampler, estimand) with dotted N^{-1/2} and N^{-1}
reference lines anchored at the first point of the panel's first method.
Ratio-problem tables (method names suffixed ``.num``/``.den``/``.ratio``)
get one column per estimand; sampler labels come from the input files, so
an MC + RQMC pair of tables renders as a 2 x 3 grid.

Pure presentation: nothing is recomputed from the data.  Use as a library
(``render(FigureSpec(...))``) or from the command line:

    rqmcis-plots mc=results_mc.csv rqmc=results_rqmc.csv --out figure.png
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["CSV_HEADER", "FigureSpec", "PanelData", "RenderResult", "load_rmse_csv", "render", "main"]

# schema of the harness tables (documented external interface)
CSV_HEADER = "method,family,nu,N,R,rmse,c_ref,c_ref_provenance,seed0"

REFERENCE_SLOPES = (-0.5, -1.0)
ESTIMAND_ORDER = ("num", "den", "ratio")


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: labelled CSV inputs, optional method subset, output path."""

    csv_paths: dict[str, str]
    output_path: str
    methods: tuple[str, ...] | None = None
    reference_slopes: tuple[float, ...] = REFERENCE_SLOPES
    title: str | None = None


@dataclass
class Series:
    method: str
    n: np.ndarray
    rmse: np.ndarray


@dataclass
class PanelData:
    """One rendered panel plus its dotted reference lines."""

    sampler: str
    estimand: str
    series: list[Series]
    reference_lines: dict[float, np.ndarray] = field(default_factory=dict)


@dataclass
class RenderResult:
    panels: list[PanelData]
    output_path: str
    n_rows: int
    n_cols: int


def load_rmse_csv(path: str) -> list[dict]:
    """Parse one harness table; raises naming any missing column."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = CSV_HEADER.split(",")
        have = reader.fieldnames or []
        for column in needed:
            if column not in have:
                raise ValueError(f"{path}: missing column {column!r}")
        rows = []
        for rec in reader:
            rows.append(
                {
                    "method": rec["method"],
                    "n": int(rec["N"]),
                    "rmse": float(rec["rmse"]),
                }
            )
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def _split_method(method: str) -> tuple[str, str]:
    base, dot, suffix = method.rpartition(".")
    if dot and suffix in ESTIMAND_ORDER:
        return base, suffix
    return method, "value"


def _panel(rows: list[dict], estimand: str, methods) -> list[Series]:
    series = []
    order: dict[str, None] = {}
    for rec in rows:
        base, est = _split_method(rec["method"])
        if est == estimand:
            order.setdefault(base, None)
    for base in order:
        if methods is not None and base not in methods:
            continue
        pts = [
            (rec["n"], rec["rmse"])
            for rec in rows
            if _split_method(rec["method"]) == (base, estimand)
        ]
        pts.sort()
        series.append(
            Series(
                method=base,
                n=np.array([p[0] for p in pts], dtype=float),
                rmse=np.array([p[1] for p in pts], dtype=float),
            )
        )
    return series


def render(spec: FigureSpec) -> RenderResult:
    """Draw the figure and write it to ``spec.output_path``."""
    if not spec.csv_paths:
        raise ValueError("no input tables given")
    if spec.methods is not None and len(spec.methods) == 0:
        raise ValueError("empty method subset")
    tables = {label: load_rmse_csv(path) for label, path in spec.csv_paths.items()}

    estimands = []
    for rows in tables.values():
        for rec in rows:
            est = _split_method(rec["method"])[1]
            if est not in estimands:
                estimands.append(est)
    estimands.sort(key=lambda e: ESTIMAND_ORDER.index(e) if e in ESTIMAND_ORDER else -1)

    n_rows, n_cols = len(tables), len(estimands)
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(4.2 * n_cols, 3.4 * n_rows), squeeze=False
    )
    panels = []
    for i, (sampler, rows) in enumerate(tables.items()):
        for j, estimand in enumerate(estimands):
            ax = axes[i][j]
            series = _panel(rows, estimand, spec.methods)
            if not series:
                raise ValueError(
                    f"{sampler}: no rows for estimand {estimand!r}"
                    + (f" and methods {spec.methods}" if spec.methods else "")
                )
            panel = PanelData(sampler=sampler, estimand=estimand, series=series)
            for s in series:
                keep = s.rmse > 0
                ax.plot(
                    np.log2(s.n[keep]), np.log2(s.rmse[keep]), marker="o", ms=3.5,
                    lw=1.0, label=s.method,
                )
            anchor = series[0]
            keep = anchor.rmse > 0
            if np.any(keep):
                n0, r0 = anchor.n[keep][0], anchor.rmse[keep][0]
                grid = np.array(sorted({n for s in series for n in s.n}))
                for slope in spec.reference_slopes:
                    line = np.log2(r0) + slope * (np.log2(grid) - math.log2(n0))
                    ax.plot(np.log2(grid), line, ls=":", color="grey", lw=1.0)
                    panel.reference_lines[slope] = line
            label = sampler if estimand == "value" else f"{sampler} / {estimand}"
            ax.set_title(label, fontsize=10)
            ax.set_xlabel("log2 N")
            ax.set_ylabel("log2 RMSE")
            ax.legend(fontsize=8)
            panels.append(panel)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    fig.savefig(spec.output_path, dpi=150)
    plt.close(fig)
    return RenderResult(
        panels=panels, output_path=spec.output_path, n_rows=n_rows, n_cols=n_cols
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rqmcis-plots",
        description="log-log RMSE figures from experiment CSV tables",
    )
    parser.add_argument(
        "tables",
        nargs="+",
        help="input tables, either PATH or LABEL=PATH (label names the panel row)",
    )
    parser.add_argument("--out", required=True, help="output image path (png/svg)")
    parser.add_argument("--methods", help="comma list restricting the plotted methods")
    parser.add_argument("--title")
    args = parser.parse_args(argv)

    csv_paths = {}
    for item in args.tables:
        if "=" in item:
            label, path = item.split("=", 1)
        else:
            label, path = f"table{len(csv_paths) + 1}", item
        csv_paths[label] = path
    methods = tuple(m.strip() for m in args.methods.split(",")) if args.methods else None
    try:
        result = render(
            FigureSpec(
                csv_paths=csv_paths, output_path=args.out, methods=methods,
                title=args.title,
            )
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.output_path} ({result.n_rows}x{result.n_cols} panels)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
