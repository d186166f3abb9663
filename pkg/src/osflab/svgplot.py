"""Minimal deterministic SVG output: log-scale loss curves and
unit-circle eigenvalue scatters. No plotting dependency; byte-stable
output so artifacts can be snapshot-tested."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H, PAD = 640, 420, 50


def _svg_header():
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">\n<rect width="{W}" height="{H}" fill="white"/>\n'
    )


def emit_loss_svg(path, series, title="smoothed loss", logy=True):
    """Loss curves on a log y axis. series maps label -> 1-D array."""
    if not series or all(len(v) == 0 for v in series.values()):
        raise InvalidInputError("no series to plot")
    floor = 1e-12
    ys = {k: np.maximum(np.asarray(v, float), floor) for k, v in series.items()}
    if logy:
        ys = {k: np.log10(v) for k, v in ys.items()}
    lo = min(float(v.min()) for v in ys.values())
    hi = max(float(v.max()) for v in ys.values())
    if hi - lo < 1e-12:
        hi = lo + 1.0
    n = max(len(v) for v in ys.values())
    sx = (W - 2 * PAD) / max(n - 1, 1)
    sy = (H - 2 * PAD) / (hi - lo)
    parts = [_svg_header(), f'<text x="{PAD}" y="20" font-size="14">{title}</text>\n']
    parts.append(
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>\n'
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>\n'
    )
    for i, (label, v) in enumerate(ys.items()):
        color = _PALETTE[i % len(_PALETTE)]
        step = max(len(v) // 2000, 1)       # cap path size
        pts = " ".join(
            f"{PAD + t * sx:.2f},{H - PAD - (v[t] - lo) * sy:.2f}"
            for t in range(0, len(v), step)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>\n'
        )
        parts.append(
            f'<text x="{W - PAD - 110}" y="{PAD + 16 * i}" font-size="12" '
            f'fill="{color}">{label}</text>\n'
        )
    ylab = "log10 loss" if logy else "loss"
    parts.append(f'<text x="8" y="{PAD}" font-size="11">{ylab}</text>\n')
    parts.append(f'<text x="{W - PAD - 30}" y="{H - 16}" font-size="11">step</text>\n')
    parts.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("".join(parts))


def emit_eigs_svg(path, eigenvalues, title="eigenvalues"):
    """Equal-aspect scatter in the complex plane with the unit circle in red."""
    eigs = np.asarray(eigenvalues, dtype=complex).ravel()
    if eigs.size == 0:
        raise InvalidInputError("no eigenvalues to plot")
    lim = max(1.1, float(np.max(np.abs(eigs))) * 1.05)
    side = min(W, H) - 2 * PAD
    cx, cy = W / 2, H / 2
    s = side / (2 * lim)
    parts = [_svg_header(), f'<text x="{PAD}" y="20" font-size="14">{title}</text>\n']
    parts.append(
        f'<line x1="{cx - side / 2}" y1="{cy}" x2="{cx + side / 2}" y2="{cy}" '
        f'stroke="#cccccc"/>\n'
        f'<line x1="{cx}" y1="{cy - side / 2}" x2="{cx}" y2="{cy + side / 2}" '
        f'stroke="#cccccc"/>\n'
    )
    parts.append(
        f'<circle cx="{cx}" cy="{cy}" r="{s:.3f}" fill="none" stroke="red"/>\n'
    )
    for z in eigs:
        parts.append(
            f'<circle cx="{cx + z.real * s:.3f}" cy="{cy - z.imag * s:.3f}" '
            f'r="3" fill="#1f77b4" fill-opacity="0.7"/>\n'
        )
    parts.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("".join(parts))
