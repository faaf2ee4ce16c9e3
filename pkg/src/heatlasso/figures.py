"""Level-set montage of the heat-flow penalty unit ball.

Renders, for each requested flow time, the curve {penalty = 1} in the
(beta_1, beta_2) plane at beta_3 = 0 on the hard-wired three-vertex graph
(one edge plus an isolated vertex). Output is a plain SVG with exactly one
contour path per panel so tests can assert path counts and bounding boxes.
"""

import numpy as np

from .graphs import figure_graph
from .heatflow import exact_heat_kernel

# Standard marching-squares connectivity. Corners are numbered 0..3
# counterclockwise from (x0, y0); edges a=0-1, b=1-2, c=2-3, d=3-0.
_EDGE_CORNERS = {"a": (0, 1), "b": (1, 2), "c": (2, 3), "d": (3, 0)}
_CASES = {
    1: [("d", "a")], 2: [("a", "b")], 3: [("d", "b")], 4: [("b", "c")],
    6: [("a", "c")], 7: [("d", "c")], 8: [("c", "d")], 9: [("a", "c")],
    11: [("b", "c")], 12: [("b", "d")], 13: [("a", "b")], 14: [("d", "a")],
}


def penalty_grid(kernel, xs, ys):
    """Penalty values on the (beta_1, beta_2) grid with beta_3 = 0."""
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    squares = np.stack([gx.ravel() ** 2, gy.ravel() ** 2,
                        np.zeros(gx.size)])
    smoothed = kernel @ squares
    vals = np.sqrt(np.abs(smoothed)).sum(axis=0)
    return vals.reshape(gx.shape)


def marching_segments(xs, ys, values, level=1.0):
    """Line segments of the contour {values = level} in world coordinates."""
    F = values - level
    segments = []
    for ix in range(len(xs) - 1):
        for iy in range(len(ys) - 1):
            corners = [
                (xs[ix], ys[iy], F[ix, iy]),
                (xs[ix + 1], ys[iy], F[ix + 1, iy]),
                (xs[ix + 1], ys[iy + 1], F[ix + 1, iy + 1]),
                (xs[ix], ys[iy + 1], F[ix, iy + 1]),
            ]
            case = sum(1 << c for c in range(4) if corners[c][2] > 0)
            if case in (0, 15):
                continue
            if case in (5, 10):
                # saddle: split by the cell-center sign
                center = np.mean([c[2] for c in corners])
                if case == 5:
                    pairs = [("d", "c"), ("a", "b")] if center > 0 else \
                        [("d", "a"), ("b", "c")]
                else:
                    pairs = [("a", "b"), ("c", "d")] if center > 0 else \
                        [("d", "a"), ("b", "c")]
            else:
                pairs = _CASES[case]
            for e1, e2 in pairs:
                p1 = _edge_crossing(corners, e1)
                p2 = _edge_crossing(corners, e2)
                if p1 is not None and p2 is not None:
                    segments.append((p1, p2))
    return segments


def _edge_crossing(corners, edge):
    i, j = _EDGE_CORNERS[edge]
    x1, y1, v1 = corners[i]
    x2, y2, v2 = corners[j]
    if (v1 > 0) == (v2 > 0):
        return None
    s = v1 / (v1 - v2)
    return (x1 + s * (x2 - x1), y1 + s * (y2 - y1))


def levelset_segments(t, grid_n=201, extent=1.25):
    """Contour of the unit penalty ball on the figure graph at flow time t."""
    kernel = exact_heat_kernel(figure_graph(), t)
    xs = np.linspace(-extent, extent, grid_n)
    ys = np.linspace(-extent, extent, grid_n)
    return marching_segments(xs, ys, penalty_grid(kernel, xs, ys))


def write_levelset_svg(t_values, path, grid_n=201, extent=1.25, panel_px=260):
    """One SVG montage, one panel (and one contour path) per flow time."""
    t_values = list(t_values)
    pad = 30
    width = len(t_values) * (panel_px + pad) + pad
    height = panel_px + 2 * pad + 16
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        '<style>path.contour{fill:none;stroke:#1c4e9c;stroke-width:1.4}'
        'rect.frame{fill:none;stroke:#999;stroke-width:1}'
        'text{font-family:sans-serif;font-size:13px}</style>',
    ]
    for idx, t in enumerate(t_values):
        ox = pad + idx * (panel_px + pad)
        oy = pad

        def to_px(pt, ox=ox, oy=oy):
            x = ox + (pt[0] + extent) / (2 * extent) * panel_px
            y = oy + (extent - pt[1]) / (2 * extent) * panel_px
            return f"{x:.2f} {y:.2f}"

        segments = levelset_segments(t, grid_n=grid_n, extent=extent)
        d = " ".join(f"M {to_px(p1)} L {to_px(p2)}" for p1, p2 in segments)
        parts.append(f'<rect class="frame" x="{ox}" y="{oy}" '
                     f'width="{panel_px}" height="{panel_px}"/>')
        parts.append(f'<path class="contour" d="{d}"/>')
        parts.append(f'<text x="{ox + panel_px / 2:.0f}" '
                     f'y="{oy + panel_px + 18}" text-anchor="middle">'
                     f't = {t:g}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
