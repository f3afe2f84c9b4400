"""Deterministic CSV/JSON writers and a small SVG line-plot emitter.

Floats are printed with 17 significant digits so values round-trip exactly;
files are written atomically (temp file then rename) with LF line endings.
Plots are derived views: every plotted number also lives in a CSV.
"""

from __future__ import annotations

import json
import math
import os
import time


def fmt_float(x) -> str:
    return f"{float(x):.17g}"


def _atomic_write(path, text: str):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell)
            elif isinstance(cell, (int,)) and not isinstance(cell, bool):
                cells.append(str(cell))
            else:
                cells.append(fmt_float(cell))
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def moving_average(values, window: int = 40) -> list[float]:
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def svg_line_plot(path, series: dict[str, tuple[list[float], list[float]]],
                  title: str = "", x_label: str = "", y_label: str = "",
                  log_y: bool = False, smooth_window: int = 0,
                  reproducible: bool = False) -> None:
    """Write a simple multi-series line chart.

    ``series`` maps a legend label to (x values, y values). Non-finite
    points are dropped. With ``log_y`` the y axis is log10 (non-positive
    points dropped).
    """
    width, height = 640, 400
    margin_l, margin_r, margin_t, margin_b = 60, 150, 30, 45
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

    cleaned = {}
    for label, (xs, ys) in series.items():
        if smooth_window > 1:
            ys = moving_average(list(ys), smooth_window)
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if math.isfinite(x) and math.isfinite(y)
               and (not log_y or y > 0)]
        if pts:
            cleaned[label] = pts
    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    if not reproducible:
        lines.append(f"<!-- generated {time.strftime('%Y-%m-%dT%H:%M:%S')} -->")
    lines.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">')
    lines.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        lines.append(f'<text x="{width/2:.0f}" y="20" text-anchor="middle" '
                     f'font-size="14">{title}</text>')

    if cleaned:
        all_x = [x for pts in cleaned.values() for x, _ in pts]
        all_y = [y for pts in cleaned.values() for _, y in pts]
        if log_y:
            all_y = [math.log10(y) for y in all_y]
        x_lo, x_hi = min(all_x), max(all_x)
        y_lo, y_hi = min(all_y), max(all_y)
        if x_hi == x_lo:
            x_hi = x_lo + 1.0
        if y_hi == y_lo:
            y_hi = y_lo + 1.0
        plot_w = width - margin_l - margin_r
        plot_h = height - margin_t - margin_b

        def sx(x):
            return margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

        def sy(y):
            if log_y:
                y = math.log10(y)
            return margin_t + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

        lines.append(f'<rect x="{margin_l}" y="{margin_t}" width="{plot_w}" '
                     f'height="{plot_h}" fill="none" stroke="black"/>')
        for frac in (0.0, 0.5, 1.0):
            xv = x_lo + frac * (x_hi - x_lo)
            yv = y_lo + frac * (y_hi - y_lo)
            lines.append(f'<text x="{sx(xv):.1f}" y="{height - margin_b + 16}" '
                         f'text-anchor="middle" font-size="10">{xv:.4g}</text>')
            label_y = 10 ** yv if log_y else yv
            py = margin_t + plot_h - frac * plot_h
            lines.append(f'<text x="{margin_l - 6}" y="{py:.1f}" '
                         f'text-anchor="end" font-size="10">{label_y:.3g}</text>')
        if x_label:
            lines.append(f'<text x="{margin_l + plot_w/2:.0f}" '
                         f'y="{height - 8}" text-anchor="middle" '
                         f'font-size="11">{x_label}</text>')
        if y_label:
            lines.append(f'<text x="14" y="{margin_t + plot_h/2:.0f}" '
                         f'font-size="11" text-anchor="middle" transform='
                         f'"rotate(-90 14 {margin_t + plot_h/2:.0f})">{y_label}</text>')
        for i, (label, pts) in enumerate(cleaned.items()):
            color = colors[i % len(colors)]
            path_d = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            lines.append(f'<polyline points="{path_d}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
            ly = margin_t + 14 + 16 * i
            lx = width - margin_r + 10
            lines.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" '
                         f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            lines.append(f'<text x="{lx + 22}" y="{ly}" '
                         f'font-size="11">{label}</text>')
    lines.append("</svg>")
    _atomic_write(path, "\n".join(lines) + "\n")
