"""Minimal static SVG emission for tradeoff curves and survival plots.

Data files are the primary outputs; these plots are a convenience and carry
no byte-stability guarantee.
"""

from __future__ import annotations

from typing import Sequence

WIDTH, HEIGHT = 640, 420
MARGIN = 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _scale(lo: float, hi: float):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo

    def to_x(v: float) -> float:
        return MARGIN + (v - lo) / span * (WIDTH - 2 * MARGIN)

    def to_y(v: float) -> float:
        return HEIGHT - MARGIN - (v - lo) / span * (HEIGHT - 2 * MARGIN)

    return to_x, to_y


def _axes(x_lo, x_hi, y_lo, y_hi, xlabel, ylabel, title) -> list[str]:
    parts = [
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="#444"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="13">{xlabel}</text>',
        f'<text x="16" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {HEIGHT / 2:.1f})">{ylabel}</text>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
    ]
    for i in range(5):
        fx = x_lo + (x_hi - x_lo) * i / 4
        fy = y_lo + (y_hi - y_lo) * i / 4
        px = MARGIN + (WIDTH - 2 * MARGIN) * i / 4
        py = HEIGHT - MARGIN - (HEIGHT - 2 * MARGIN) * i / 4
        parts.append(
            f'<text x="{px:.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
            f'font-size="11">{fx:.2f}</text>'
        )
        parts.append(
            f'<text x="{MARGIN - 8}" y="{py:.1f}" text-anchor="end" '
            f'font-size="11">{fy:.2f}</text>'
        )
    return parts


def _polyline(xs, ys, color: str, dashed: bool = False) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    dash = ' stroke-dasharray="5,4"' if dashed else ""
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>'


def _document(parts: Sequence[str]) -> str:
    body = "\n".join(parts)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n<rect width="100%" height="100%" fill="white"/>\n'
        f"{body}\n</svg>\n"
    )


def tradeoff_svg(
    series: Sequence[tuple[str, Sequence[float], Sequence[float], int | None]],
    title: str = "match rate vs temporal fidelity",
) -> str:
    """Scatter/line plot on the unit square; each series is
    (label, match_rates, metric_values, index_of_highlighted_point)."""
    to_x, to_y = _scale(0.0, 1.0)
    parts = _axes(0, 1, 0, 1, "event match rate", "metric value", title)
    for i, (label, xs, ys, mark) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = [(to_x(x), to_y(y)) for x, y in zip(xs, ys) if y is not None]
        if pts:
            parts.append(_polyline([p[0] for p in pts], [p[1] for p in pts], color))
        for x, y in pts:
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="1.6" fill="{color}"/>')
        if mark is not None and ys[mark] is not None:
            parts.append(
                f'<circle cx="{to_x(xs[mark]):.2f}" cy="{to_y(ys[mark]):.2f}" r="4.5" '
                f'fill="none" stroke="{color}" stroke-width="1.6"/>'
            )
        parts.append(
            f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 16 + 16 * i}" text-anchor="end" '
            f'font-size="12" fill="{color}">{label}</text>'
        )
    return _document(parts)


def _step_points(times, values, t_max, initial=1.0):
    xs = [0.0]
    ys = [initial]
    for t, v in zip(times, values):
        xs.extend([t, t])
        ys.extend([ys[-1], v])
    xs.append(t_max)
    ys.append(ys[-1])
    return xs, ys


def survival_svg(
    curves: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    bands: Sequence[tuple[str, Sequence[float], Sequence[float], Sequence[float]]] = (),
    title: str = "adjusted survival",
) -> str:
    """Step plot of survival curves with optional shaded percentile bands.

    ``curves``: (label, times, values). ``bands``: (label, times, lower, upper).
    """
    t_max = max((max(ts) for _, ts, _ in curves if len(ts)), default=1.0)
    to_t = lambda t: MARGIN + t / (t_max or 1.0) * (WIDTH - 2 * MARGIN)  # noqa: E731
    _, to_y = _scale(0.0, 1.0)
    parts = _axes(0, t_max, 0, 1, "time (months)", "event-free probability", title)
    for i, (label, ts, lo, hi) in enumerate(bands):
        color = PALETTE[i % len(PALETTE)]
        lx, ly = _step_points(ts, lo, t_max)
        ux, uy = _step_points(ts, hi, t_max)
        pts = [(to_t(x), to_y(y)) for x, y in zip(lx, ly)]
        pts += [(to_t(x), to_y(y)) for x, y in zip(ux[::-1], uy[::-1])]
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        parts.append(f'<polygon points="{path}" fill="{color}" opacity="0.15"/>')
    for i, (label, ts, vs) in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        xs, ys = _step_points(ts, vs, t_max)
        parts.append(_polyline([to_t(x) for x in xs], [to_y(y) for y in ys], color))
        parts.append(
            f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 16 + 16 * i}" text-anchor="end" '
            f'font-size="12" fill="{color}">{label}</text>'
        )
    return _document(parts)
