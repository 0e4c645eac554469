"""Standalone SVG rendering of ROC curves (no display server needed)."""

from .fsutil import atomic_write_text

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

_SIZE = 560
_MARGIN = 70


def _px(fpr, tpr):
    span = _SIZE - 2 * _MARGIN
    x = _MARGIN + fpr * span
    y = _SIZE - _MARGIN - tpr * span
    return f"{x:.2f},{y:.2f}"


def roc_svg(curves, title="ROC") -> str:
    """Render labeled ROC curves with a diagonal reference and an AUC legend.

    ``curves`` is a list of (label, RocCurve) pairs.
    """
    span = _SIZE - 2 * _MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" '
        f'viewBox="0 0 {_SIZE} {_SIZE}" font-family="sans-serif" font-size="13">',
        f'<rect width="{_SIZE}" height="{_SIZE}" fill="white"/>',
        f'<text x="{_SIZE / 2:.0f}" y="30" text-anchor="middle" font-size="16">{title}</text>',
    ]
    # axes box and ticks
    parts.append(
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{span}" height="{span}" '
        f'fill="none" stroke="#333" stroke-width="1"/>'
    )
    for i in range(5):
        frac = i / 4
        x = _MARGIN + frac * span
        y = _SIZE - _MARGIN - frac * span
        parts.append(
            f'<text x="{x:.0f}" y="{_SIZE - _MARGIN + 20}" text-anchor="middle">{frac:.2f}</text>'
        )
        parts.append(
            f'<text x="{_MARGIN - 8}" y="{y + 4:.0f}" text-anchor="end">{frac:.2f}</text>'
        )
    parts.append(
        f'<text x="{_SIZE / 2:.0f}" y="{_SIZE - 18}" text-anchor="middle">false positive rate</text>'
    )
    parts.append(
        f'<text x="20" y="{_SIZE / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 20 {_SIZE / 2:.0f})">true positive rate</text>'
    )
    x0, y0 = _MARGIN, _SIZE - _MARGIN
    x1, y1 = _SIZE - _MARGIN, _MARGIN
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" '
        f'stroke="#999" stroke-width="1" stroke-dasharray="6,4"/>'
    )
    for i, (label, curve) in enumerate(curves):
        color = _PALETTE[i % len(_PALETTE)]
        path = " ".join(_px(p[0], p[1]) for p in curve.points)
        parts.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        ly = _SIZE - _MARGIN - 18 * (len(curves) - i) - 8
        parts.append(
            f'<line x1="{_SIZE - _MARGIN - 170}" y1="{ly - 4}" '
            f'x2="{_SIZE - _MARGIN - 140}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_SIZE - _MARGIN - 132}" y="{ly}">{label} (AUC={curve.auc:.3f})</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_roc_svg(path, curves, title="ROC") -> None:
    atomic_write_text(path, roc_svg(curves, title=title))
