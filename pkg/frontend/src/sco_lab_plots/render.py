"""Render sco-lab experiment artifacts into static PNG + SVG figures.

Inputs are the primary tool's file schemas: ratefit JSON (log-log rate
fits), simulate summary JSON (per-m success estimates with exact binomial
bands), and deviation CSVs with a ``sup_deviation`` column. The renderer
only formats numbers that already exist in the artifacts; in particular the
slope annotation on rate figures is read from the JSON, never refitted.
Styles are pinned and SVG hashing is salted so rendering is byte-identical
across runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIGURE_KINDS = ("rate", "success-curve", "deviation-hist")

_RC = {
    "figure.figsize": (6.4, 4.4),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.size": 10,
    "svg.hashsalt": "sco-lab-plots",
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class SchemaError(ValueError):
    """Input file does not match the expected artifact schema."""


@dataclass(frozen=True)
class FigureSpec:
    inputs: tuple[str, ...]
    kind: str
    out: str
    title: str | None = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input file is required")
        object.__setattr__(self, "inputs", tuple(self.inputs))


@dataclass(frozen=True)
class RenderReport:
    png_path: str
    svg_path: str
    annotations: tuple[str, ...]


def _load_ratefit(path: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    missing = [k for k in ("points", "slope", "intercept") if k not in data]
    if missing:
        raise SchemaError(f"{path}: ratefit JSON missing keys {missing}")
    if not data["points"]:
        raise SchemaError(f"{path}: ratefit JSON has no points")
    return data


def _load_summary(path: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if "per_m" not in data or not data["per_m"]:
        raise SchemaError(f"{path}: summary JSON missing non-empty 'per_m'")
    for row in data["per_m"]:
        missing = [k for k in ("m", "p_hat", "ci_low", "ci_high")
                   if k not in row]
        if missing:
            raise SchemaError(f"{path}: per_m entry missing {missing}")
    return data


def _load_deviations(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty deviation CSV")
    if "sup_deviation" not in rows[0]:
        raise SchemaError(f"{path}: deviation CSV missing 'sup_deviation' column")
    return np.array([float(r["sup_deviation"]) for r in rows])


def _render_rate(ax, inputs) -> list[str]:
    annotations = []
    anchor = None
    for i, path in enumerate(inputs):
        fit = _load_ratefit(path)
        eps = np.array([p[0] for p in fit["points"]], dtype=float)
        m = np.array([p[1] for p in fit["points"]], dtype=float)
        x = 1.0 / eps
        label = fit.get("label") or f"series {i + 1}"
        ax.loglog(x, m, "o", label=f"{label} (slope {fit['slope']:.2f})")
        xs = np.geomspace(x.min(), x.max(), 50)
        ax.loglog(xs, np.exp(fit["intercept"]) * xs ** fit["slope"], "-",
                  color=ax.lines[-1].get_color(), alpha=0.7)
        annotations.append(f"slope = {fit['slope']:.2f}")
        if anchor is None:
            anchor = (x.min(), m.min())
    x0, y0 = anchor
    xs = np.geomspace(x0, x0 * 16, 50)
    for ref, style in ((1.0, ":"), (2.0, "--")):
        ax.loglog(xs, y0 * (xs / x0) ** ref, style, color="gray",
                  label=f"reference slope {ref:g}")
    ax.set_xlabel("1 / epsilon")
    ax.set_ylabel("empirical sample size m")
    ax.legend(fontsize=8)
    return annotations


def _render_success_curve(ax, inputs) -> list[str]:
    annotations = []
    for path in inputs:
        summary = _load_summary(path)
        per_m = sorted(summary["per_m"], key=lambda r: r["m"])
        m = np.array([r["m"] for r in per_m], dtype=float)
        p = np.array([r["p_hat"] for r in per_m])
        lo = np.array([r["ci_low"] for r in per_m])
        hi = np.array([r["ci_high"] for r in per_m])
        label = summary.get("experiment_id", path)
        ax.fill_between(m, lo, hi, alpha=0.25)
        ax.plot(m, p, "o-", label=label)
        annotations.append(f"{label}: p_hat in [{p.min():.3f}, {p.max():.3f}]")
        delta = summary.get("delta")
        if delta is not None:
            ax.axhline(1 - delta, color="gray", linestyle="--", linewidth=1)
    ax.set_xscale("log")
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("sample size m")
    ax.set_ylabel("empirical success probability")
    ax.legend(fontsize=8)
    return annotations


def _render_deviation_hist(ax, inputs) -> list[str]:
    annotations = []
    for path in inputs:
        sups = _load_deviations(path)
        med = float(np.median(sups))
        ax.hist(sups, bins=30, alpha=0.6)
        ax.axvline(med, color="black", linestyle="--", linewidth=1.2)
        annotations.append(f"median = {med:.4g}")
    ax.set_xlabel("anchored sup-deviation")
    ax.set_ylabel("trials")
    return annotations


def render(spec: FigureSpec) -> RenderReport:
    """Write <out>.png and <out>.svg; returns paths and the annotation
    strings drawn on the figure (used by tests to pin fidelity)."""
    base = spec.out
    for suffix in (".png", ".svg"):
        if base.endswith(suffix):
            base = base[: -len(suffix)]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            if spec.kind == "rate":
                annotations = _render_rate(ax, spec.inputs)
            elif spec.kind == "success-curve":
                annotations = _render_success_curve(ax, spec.inputs)
            else:
                annotations = _render_deviation_hist(ax, spec.inputs)
            for i, text in enumerate(annotations):
                ax.annotate(text, xy=(0.02, 0.96 - 0.06 * i),
                            xycoords="axes fraction", fontsize=8, va="top")
            if spec.title:
                ax.set_title(spec.title)
            png_path, svg_path = base + ".png", base + ".svg"
            fig.savefig(png_path, format="png")
            fig.savefig(svg_path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return RenderReport(png_path, svg_path, tuple(annotations))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sco-lab-plots",
        description="Render sco-lab experiment artifacts as PNG + SVG figures.")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="artifact files (ratefit/summary JSON or "
                             "deviation CSV, depending on --kind)")
    parser.add_argument("--kind", choices=FIGURE_KINDS, required=True)
    parser.add_argument("--out", required=True,
                        help="output path base; .png and .svg are written")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    try:
        report = render(FigureSpec(tuple(args.inputs), args.kind, args.out,
                                   args.title))
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(report.png_path)
    print(report.svg_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
