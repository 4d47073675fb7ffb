"""Report rendering: ``report.json`` plus optional SVG figures.

Figures are hand-written SVG so output is textual and diffable. Each figure
comes with a CSV sidecar holding the exact numbers it draws.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .survey import ATTRIBUTE_RANGES, ITEM_NAMES

PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666")
WIDTH, HEIGHT = 640, 400
MARGIN = 50


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _svg(body: list[str], title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">'
    )
    return "\n".join(
        [head, f'<title>{escape(title)}</title>', f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>']
        + body
        + ["</svg>", ""]
    )


def _axes(x_label: str, y_label: str) -> list[str]:
    x0, y0, x1, y1 = MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN
    return [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(x_label)}</text>',
        f'<text x="14" y="{(y0 + y1) // 2}" text-anchor="middle" transform="rotate(-90 14 {(y0 + y1) // 2})">{escape(y_label)}</text>',
    ]


def _legend(names) -> list[str]:
    out = []
    for j, name in enumerate(names):
        y = MARGIN + 14 * j
        out.append(f'<rect x="{WIDTH - MARGIN - 90}" y="{y - 9}" width="10" height="10" fill="{PALETTE[j % len(PALETTE)]}"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 75}" y="{y}">{escape(name)}</text>')
    return out


def silhouette_svg(values: np.ndarray, assignments: np.ndarray, names) -> tuple[str, str]:
    """Per-sample silhouettes sorted within each cluster, one band per cluster."""
    k = len(names)
    n = values.shape[0]
    lo = min(0.0, float(values.min()))
    plot_w = WIDTH - 2 * MARGIN
    plot_h = HEIGHT - 2 * MARGIN
    gap = max(1, n // 50)
    total = n + gap * (k - 1)

    def x_of(v):
        return MARGIN + (v - lo) / (1.0 - lo) * plot_w

    body = _axes("silhouette value", "samples grouped by cluster")
    body.append(f'<line x1="{_fmt(x_of(0))}" y1="{MARGIN}" x2="{_fmt(x_of(0))}" y2="{HEIGHT - MARGIN}" stroke="#999"/>')
    sidecar = ["cluster,rank,silhouette"]
    pos = 0
    for j in range(k):
        vals = np.sort(values[assignments == j])[::-1]
        if vals.size:
            ys = [HEIGHT - MARGIN - (pos + i) / total * plot_h for i in range(vals.size + 1)]
            pts = [f"{_fmt(x_of(0))},{_fmt(ys[0])}"]
            for i, v in enumerate(vals):
                pts.append(f"{_fmt(x_of(v))},{_fmt(ys[i])}")
                pts.append(f"{_fmt(x_of(v))},{_fmt(ys[i + 1])}")
            pts.append(f"{_fmt(x_of(0))},{_fmt(ys[-1])}")
            body.append(
                f'<polygon class="silhouette" data-cluster="{j}" points="{" ".join(pts)}" fill="{PALETTE[j % len(PALETTE)]}"/>'
            )
            mean = float(vals.mean())
            body.append(
                f'<text x="{MARGIN + 4}" y="{_fmt((ys[0] + ys[-1]) / 2)}">{escape(names[j])} mean {mean:.3f}</text>'
            )
            sidecar += [f"{j},{i},{float(v)!r}" for i, v in enumerate(vals)]
        pos += vals.size + gap
    return _svg(body, "Silhouette by cluster"), "\n".join(sidecar) + "\n"


def centroids_svg(centroids: np.ndarray, names) -> tuple[str, str]:
    """One polyline per cluster over the 15 item means."""
    m = centroids.shape[1]
    plot_w = WIDTH - 2 * MARGIN
    plot_h = HEIGHT - 2 * MARGIN

    def xy(i, v):
        return MARGIN + i / (m - 1) * plot_w, HEIGHT - MARGIN - (v - 1.0) / 4.0 * plot_h

    body = _axes("item", "centroid value (1-5)")
    for i in range(m):
        x, _ = xy(i, 1)
        body.append(f'<text x="{_fmt(x)}" y="{HEIGHT - MARGIN + 14}" text-anchor="middle">{ITEM_NAMES[i]}</text>')
    for j, row in enumerate(centroids):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in (xy(i, float(v)) for i, v in enumerate(row)))
        body.append(
            f'<polyline class="centroid" data-cluster="{j}" points="{pts}" fill="none" '
            f'stroke="{PALETTE[j % len(PALETTE)]}" stroke-width="2"/>'
        )
    body += _legend(names)
    sidecar = ["cluster," + ",".join(ITEM_NAMES)]
    sidecar += [f"{j}," + ",".join(repr(float(v)) for v in row) for j, row in enumerate(centroids)]
    return _svg(body, "Cluster centroids"), "\n".join(sidecar) + "\n"


def career_hist_svg(career: np.ndarray, assignments: np.ndarray, names) -> tuple[str, str]:
    """Stacked bars: respondents per occupation code, split by cluster."""
    lo, hi = ATTRIBUTE_RANGES["career"]
    codes = list(range(lo, hi + 1))
    k = len(names)
    counts = np.zeros((len(codes), k), dtype=np.int64)
    for c, a in zip(career, assignments):
        if lo <= c <= hi:
            counts[c - lo, a] += 1
    top = max(1, int(counts.sum(axis=1).max()))
    plot_w = WIDTH - 2 * MARGIN
    plot_h = HEIGHT - 2 * MARGIN
    bar = plot_w / len(codes)
    body = _axes("occupation code", "respondents")
    for r, code in enumerate(codes):
        x = MARGIN + r * bar
        base = HEIGHT - MARGIN
        for j in range(k):
            h = counts[r, j] / top * plot_h
            if h > 0:
                body.append(
                    f'<rect class="bar" data-code="{code}" data-cluster="{j}" x="{_fmt(x + 2)}" y="{_fmt(base - h)}" '
                    f'width="{_fmt(bar - 4)}" height="{_fmt(h)}" fill="{PALETTE[j % len(PALETTE)]}"/>'
                )
            base -= h
        body.append(f'<text x="{_fmt(x + bar / 2)}" y="{HEIGHT - MARGIN + 14}" text-anchor="middle">{code}</text>')
    body += _legend(names)
    sidecar = ["career," + ",".join(f"cluster{j}" for j in range(k))]
    sidecar += [f"{code}," + ",".join(str(int(v)) for v in counts[r]) for r, code in enumerate(codes)]
    return _svg(body, "Occupation by cluster"), "\n".join(sidecar) + "\n"


def render_report(report, out_dir, emit_figures: bool = False) -> list[Path]:
    """Write ``report.json`` and, with ``emit_figures``, three SVGs plus sidecars.

    Returns the written paths. Without figures exactly one file is written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.json"]
    written[0].write_text(report.to_json())
    if not emit_figures:
        return written
    fig = report.figures
    if fig is None:
        raise ValueError("report carries no figure data")
    outputs = []
    if fig.silhouette is not None:
        outputs.append(("silhouette", silhouette_svg(fig.silhouette, fig.assignments, fig.cluster_names)))
    outputs.append(("centroids", centroids_svg(fig.centroids, fig.cluster_names)))
    outputs.append(("career_hist", career_hist_svg(fig.career, fig.assignments, fig.cluster_names)))
    for stem, (svg, csv_text) in outputs:
        for suffix, text in ((".svg", svg), (".csv", csv_text)):
            path = out / f"{stem}{suffix}"
            path.write_text(text)
            written.append(path)
    return written
