"""Minimal SVG rendering of polygonal meshes for visual inspection."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .mesh import BoundaryTag, PolygonalMesh

__all__ = ["mesh_to_svg"]


def mesh_to_svg(
    mesh: PolygonalMesh,
    path: str | Path,
    marked: Iterable[int] = (),
    width: int = 720,
) -> None:
    """Write the mesh as an SVG file; cells in ``marked`` are shaded.

    Spectral-boundary edges are drawn with a heavier red stroke so the
    eigenvalue boundary is visible at a glance.
    """
    verts = mesh.vertices
    xmin, ymin = verts.min(axis=0)
    xmax, ymax = verts.max(axis=0)
    span_x = max(xmax - xmin, 1e-30)
    span_y = max(ymax - ymin, 1e-30)
    margin = 0.04 * max(span_x, span_y)
    scale = width / (span_x + 2 * margin)
    height = int(round(scale * (span_y + 2 * margin)))

    def to_px(x: float, y: float) -> tuple[float, float]:
        return (
            scale * (x - xmin + margin),
            scale * (ymax - y + margin),  # flip: SVG y axis points down
        )

    marked_set = set(int(c) for c in marked)
    stroke = max(0.5, 0.0012 * width)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for cid, cyc in enumerate(mesh.cells):
        pts = " ".join(
            "{:.3f},{:.3f}".format(*to_px(verts[v][0], verts[v][1])) for v in cyc
        )
        fill = "#f4b8b8" if cid in marked_set else "none"
        lines.append(
            f'<polygon points="{pts}" fill="{fill}" stroke="#333333" '
            f'stroke-width="{stroke:.2f}" stroke-linejoin="round"/>'
        )
    for edge in mesh.edges:
        if edge.tag is BoundaryTag.GAMMA0:
            x1, y1 = to_px(*verts[edge.a])
            x2, y2 = to_px(*verts[edge.b])
            lines.append(
                f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" '
                f'stroke="#c62828" stroke-width="{2.5 * stroke:.2f}"/>'
            )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")
