"""CSV, JSON and SVG emission for risk tables and reports."""

from __future__ import annotations

import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .asymptotic_risk import kappa0
from .mc_harness import RiskCell, RiskTable

SVG_WIDTH = 1200
SVG_HEIGHT = 700
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def fmt(x) -> str:
    """Round-trip decimal text for a number (17 significant digits)."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def risk_table_csv(table: RiskTable) -> str:
    lines = [",".join(RiskCell.columns())]
    lines += [",".join(fmt(v) for v in cell.row()) for cell in table.cells]
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def risk_table_dict(table: RiskTable) -> dict:
    cfg = table.config
    return {
        "config": {
            "n": cfg.n,
            "eps": cfg.eps,
            "theta_values": list(cfg.theta_values),
            "tau_values": list(cfg.tau_values),
            "reps": cfg.reps,
            "seed": cfg.seed,
            "functional": cfg.functional_name,
        },
        "tau_bayes_convention": "posterior mean, not rounded",
        "cells": [dict(zip(RiskCell.columns(), c.row())) for c in table.cells],
        "notes": _notes(table),
    }


def _notes(table: RiskTable) -> list[str]:
    notes = []
    if any(c.theta == 0 for c in table.cells):
        notes.append("theta = 0 cells have no change; tau is not identifiable there")
    return notes


def _ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    span = hi - lo
    raw = span / max(count - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def line_chart_svg(
    series: dict,
    title: str,
    xlabel: str,
    ylabel: str,
    reference: float | None = None,
    reference_label: str = "",
) -> str:
    """Standalone SVG 1.1 line chart, one polyline per named series.

    ``series`` maps a legend label to a list of ``(x, y)`` points; non-finite
    ``y`` values split the polyline.
    """
    left, right, top, bottom = 90, 220, 60, 70
    pw = SVG_WIDTH - left - right
    ph = SVG_HEIGHT - top - bottom
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts if math.isfinite(y)]
    if reference is not None:
        ys.append(reference)
    x0, x1 = min(xs), max(xs)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (y1 - y) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<text x="{SVG_WIDTH / 2:.2f}" y="30" text-anchor="middle" font-family="sans-serif" '
        f'font-size="20">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(
            f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 6}" stroke="black"/>'
        )
        out.append(
            f'<text x="{px(t):.2f}" y="{top + ph + 22}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{t:g}</text>'
        )
    for t in _ticks(y0, y1):
        out.append(
            f'<line x1="{left - 6}" y1="{py(t):.2f}" x2="{left + pw}" y2="{py(t):.2f}" '
            f'stroke="#dddddd"/>'
        )
        out.append(
            f'<text x="{left - 10}" y="{py(t) + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="13">{t:g}</text>'
        )
    out.append(
        f'<text x="{left + pw / 2:.2f}" y="{SVG_HEIGHT - 20}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="25" y="{top + ph / 2:.2f}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15" transform="rotate(-90 25 {top + ph / 2:.2f})">{escape(ylabel)}</text>'
    )
    if reference is not None:
        out.append(
            f'<line class="reference" x1="{left}" y1="{py(reference):.2f}" x2="{left + pw}" '
            f'y2="{py(reference):.2f}" stroke="black" stroke-dasharray="8,5"/>'
        )
    legend_y = top + 10
    for i, (label, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        runs, cur = [], []
        for x, y in pts:
            if math.isfinite(y):
                cur.append(f"{px(x):.2f},{py(y):.2f}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for run in runs:
            out.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                f'points="{" ".join(run)}"/>'
            )
        ly = legend_y + 24 * i
        lx = left + pw + 20
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(
            f'<text x="{lx + 38}" y="{ly + 5}" font-family="sans-serif" font-size="14">'
            f"{escape(label)}</text>"
        )
    if reference is not None:
        ly = legend_y + 24 * len(series)
        lx = left + pw + 20
        out.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 30}" y2="{ly}" stroke="black" stroke-dasharray="8,5"/>'
        )
        out.append(
            f'<text x="{lx + 38}" y="{ly + 5}" font-family="sans-serif" font-size="14">'
            f"{escape(reference_label)}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _series(table: RiskTable, attr: str) -> dict:
    out = {}
    for theta in table.config.theta_values:
        pts = [(c.tau, getattr(c, attr)) for c in table.cells if c.theta == theta]
        out[f"theta/eps = {theta / table.config.eps:g}"] = sorted(pts)
    return out


def kappa_svg(table: RiskTable) -> str:
    k0 = kappa0()
    return line_chart_svg(
        _series(table, "kappa"),
        title="Risk ratio kappa: Bayes vs MLE estimate of tau",
        xlabel="tau",
        ylabel="kappa",
        reference=k0,
        reference_label=f"kappa0 = {k0:.4f}",
    )


def kappa_tilde_svg(table: RiskTable) -> str:
    return line_chart_svg(
        _series(table, "kappa_tilde"),
        title="Risk ratio kappa tilde: Bayes vs MLE estimate of L = theta*tau",
        xlabel="tau",
        ylabel="kappa tilde",
    )


def write_figure1(table: RiskTable, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "risk_table": out / "risk_table.csv",
        "kappa": out / "kappa.svg",
        "kappa_tilde": out / "kappa_tilde.svg",
    }
    paths["risk_table"].write_text(risk_table_csv(table), encoding="utf-8")
    paths["kappa"].write_text(kappa_svg(table), encoding="utf-8")
    paths["kappa_tilde"].write_text(kappa_tilde_svg(table), encoding="utf-8")
    return paths
