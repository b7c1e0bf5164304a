"""Polygonal mesh container: topology construction, geometry, quality checks, JSON I/O.

Cells are simple polygons stored as counterclockwise vertex cycles.  Hanging
vertices created by local refinement are ordinary (possibly collinear) cycle
entries, so conformity always means exact edge matching: every interior edge
is traversed once in each direction by its two incident cells.

Validation and the edge table are vectorized over groups of equal-length
cycles, which keeps topology construction cheap on the fine meshes produced
late in an adaptive run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "MeshError",
    "BoundaryTag",
    "Edge",
    "PolygonalMesh",
    "MeshQualityReport",
    "build_topology",
    "signed_area",
    "polygon_centroid",
    "polygon_diameter",
    "element_area",
    "element_centroid",
    "element_diameter",
    "sub_triangulate",
    "quality_report",
    "save_mesh",
    "load_mesh",
]

# Relative tolerance deciding when three points are treated as collinear:
# triangle area below COLLINEAR_REL * h^2 counts as zero.
COLLINEAR_REL = 1e-12


class MeshError(Exception):
    """Raised when mesh construction or validation fails."""


class BoundaryTag(Enum):
    INTERIOR = "interior"
    GAMMA0 = "gamma0"  # spectral boundary part (eigenvalue in the flux condition)
    GAMMA1 = "gamma1"  # reflecting boundary part (zero normal flux)


# A boundary classifier is either an explicit map from the sorted vertex pair
# to a tag, or a geometric predicate receiving the two endpoint coordinates.
TagMap = Mapping[tuple[int, int], "BoundaryTag | str"]
TagRule = Callable[[np.ndarray, np.ndarray], "BoundaryTag | str"]


@dataclass(frozen=True)
class Edge:
    """Mesh edge oriented as (a, b), the direction its ``left`` cell traverses it.

    ``right`` is the cell traversing (b, a), or None on the domain boundary.
    """

    a: int
    b: int
    left: int
    right: int | None
    tag: BoundaryTag

    @property
    def is_boundary(self) -> bool:
        return self.right is None

    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


@dataclass(frozen=True, eq=False)
class PolygonalMesh:
    """Immutable conforming polygonal mesh.

    Build instances through :func:`build_topology` (or :func:`load_mesh`),
    which validates orientation, simplicity, manifoldness and boundary tags.
    """

    vertices: np.ndarray                    # (n_vertices, 2), read-only
    cells: tuple[np.ndarray, ...]           # ccw vertex cycles, read-only
    edges: tuple[Edge, ...]
    cell_edges: tuple[np.ndarray, ...]      # edge ids of each cell, cycle order
    _edge_index: dict = field(repr=False)   # sorted vertex pair -> index into edges
    # flat per-edge arrays "a", "b", "left", "right" (-1 on the boundary) and
    # "tag" (BoundaryTag ordinal), mirroring ``edges`` for vectorized consumers
    _edge_arrays: dict = field(repr=False)

    def edge_arrays(self) -> dict[str, np.ndarray]:
        """Per-edge index arrays; ``tag`` uses the ordinal positions of BoundaryTag."""
        return self._edge_arrays

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def edge_id(self, i: int, j: int) -> int:
        """Index of the edge with endpoints {i, j}."""
        key = (i, j) if i < j else (j, i)
        try:
            return self._edge_index[key]
        except KeyError:
            raise MeshError(f"no edge between vertices {i} and {j}") from None

    def cell_edge_ids(self, cell: int) -> np.ndarray:
        """Edge indices of one cell, in cycle order."""
        return self.cell_edges[cell]

    def gamma0_edge_ids(self) -> list[int]:
        return [k for k, e in enumerate(self.edges) if e.tag is BoundaryTag.GAMMA0]

    def gamma0_vertices(self) -> np.ndarray:
        """Sorted vertex indices lying on the spectral boundary."""
        ids = set()
        for e in self.edges:
            if e.tag is BoundaryTag.GAMMA0:
                ids.add(e.a)
                ids.add(e.b)
        return np.array(sorted(ids), dtype=int)

    def boundary_tag_map(self) -> dict[tuple[int, int], BoundaryTag]:
        """Sorted-vertex-pair -> tag for all boundary edges (used by refinement)."""
        return {e.key(): e.tag for e in self.edges if e.is_boundary}

    def structurally_equal(self, other: "PolygonalMesh") -> bool:
        if self.n_vertices != other.n_vertices or self.n_cells != other.n_cells:
            return False
        if not np.array_equal(self.vertices, other.vertices):
            return False
        if any(not np.array_equal(a, b) for a, b in zip(self.cells, other.cells)):
            return False
        return [(e.a, e.b, e.tag) for e in self.edges] == [
            (e.a, e.b, e.tag) for e in other.edges
        ]


# ---------------------------------------------------------------------------
# polygon geometry on raw coordinate arrays


def signed_area(points: np.ndarray) -> float:
    """Shoelace signed area of a vertex cycle; positive when counterclockwise.

    Coordinates are shifted to a local origin first: tiny cells far from the
    global origin would otherwise lose most significant digits to cancellation
    in the cross products.
    """
    local = points - points.mean(axis=0)
    x = local[:, 0]
    y = local[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(points: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon (shoelace moments, local coordinates)."""
    ref = points.mean(axis=0)
    local = points - ref
    x = local[:, 0]
    y = local[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * float(np.sum(cross))
    if area == 0.0:
        raise MeshError("centroid of a zero-area polygon is undefined")
    cx = float(np.sum((x + np.roll(x, -1)) * cross)) / (6.0 * area)
    cy = float(np.sum((y + np.roll(y, -1)) * cross)) / (6.0 * area)
    return ref + np.array([cx, cy])


def polygon_diameter(points: np.ndarray) -> float:
    """Largest pairwise vertex distance."""
    diff = points[:, None, :] - points[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=2))))


def _orient(p, q, r) -> float:
    """Twice the signed area of triangle (p, q, r)."""
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


# ---------------------------------------------------------------------------
# vectorized cycle validation


def _first_true(mask: np.ndarray) -> int:
    return int(np.nonzero(mask)[0][0])


def _segment_distance2(px, py, ax, ay, bx, by):
    """Squared distance from points (px, py) to segments (a, b), elementwise."""
    abx = bx - ax
    aby = by - ay
    denom = abx * abx + aby * aby
    t = ((px - ax) * abx + (py - ay) * aby) / np.where(denom == 0.0, 1.0, denom)
    t = np.clip(t, 0.0, 1.0)
    dx = px - (ax + t * abx)
    dy = py - (ay + t * aby)
    return dx * dx + dy * dy


def _check_simple_group(pts: np.ndarray, ids: np.ndarray, diam: np.ndarray) -> None:
    """Reject self-intersecting cycles, vectorized over a (m, n, 2) group.

    Adjacent edges may touch (shared endpoint, collinear hanging vertices);
    any contact between non-adjacent edges makes the cycle non-simple.
    """
    m, n, _ = pts.shape
    if n == 3:
        return
    x = pts[..., 0]
    y = pts[..., 1]
    area_tol = COLLINEAR_REL * diam * diam
    dist_tol2 = (COLLINEAR_REL * diam) ** 2

    def orient(i, j, k):
        return (x[:, j] - x[:, i]) * (y[:, k] - y[:, i]) - (y[:, j] - y[:, i]) * (
            x[:, k] - x[:, i]
        )

    for i in range(n):
        i1 = (i + 1) % n
        for j in range(i + 1, n):
            j1 = (j + 1) % n
            if j == i or j1 == i or i1 == j:
                continue
            d1 = orient(j, j1, i)
            d2 = orient(j, j1, i1)
            d3 = orient(i, i1, j)
            d4 = orient(i, i1, j1)
            proper = (
                ((d1 > area_tol) & (d2 < -area_tol)) | ((d1 < -area_tol) & (d2 > area_tol))
            ) & (((d3 > area_tol) & (d4 < -area_tol)) | ((d3 < -area_tol) & (d4 > area_tol)))
            touch = (
                (_segment_distance2(x[:, i], y[:, i], x[:, j], y[:, j], x[:, j1], y[:, j1]) <= dist_tol2)
                | (_segment_distance2(x[:, i1], y[:, i1], x[:, j], y[:, j], x[:, j1], y[:, j1]) <= dist_tol2)
                | (_segment_distance2(x[:, j], y[:, j], x[:, i], y[:, i], x[:, i1], y[:, i1]) <= dist_tol2)
                | (_segment_distance2(x[:, j1], y[:, j1], x[:, i], y[:, i], x[:, i1], y[:, i1]) <= dist_tol2)
            )
            bad = proper | touch
            if np.any(bad):
                cid = int(ids[_first_true(bad)])
                raise MeshError(
                    f"cell {cid} is not a simple polygon: edges ({i},{i1}) and "
                    f"({j},{j1}) of its cycle intersect"
                )


def _validate_cycles(verts: np.ndarray, cycles: list[np.ndarray]) -> None:
    """Group-wise duplicate/degeneracy/orientation/simplicity checks.

    Clockwise cycles are reversed in place (the lists hold per-cell arrays).
    """
    lengths = np.array([len(c) for c in cycles])
    by_length: dict[int, list[int]] = {}
    for cid, n in enumerate(lengths):
        by_length.setdefault(int(n), []).append(cid)

    for n, members in sorted(by_length.items()):
        ids = np.array(members)
        stack = np.vstack([cycles[c] for c in members]).astype(np.int64, copy=False)
        stack = stack.reshape(len(members), n)

        srt = np.sort(stack, axis=1)
        dup = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
        if np.any(dup):
            raise MeshError(f"cell {int(ids[_first_true(dup)])} repeats a vertex in its cycle")

        pts = verts[stack]
        local = pts - pts.mean(axis=1, keepdims=True)
        x = local[..., 0]
        y = local[..., 1]
        x1 = np.roll(x, -1, axis=1)
        y1 = np.roll(y, -1, axis=1)
        area = 0.5 * np.sum(x * y1 - x1 * y, axis=1)

        diff = pts[:, :, None, :] - pts[:, None, :, :]
        diam = np.sqrt(np.max(np.sum(diff * diff, axis=3), axis=(1, 2)))

        degenerate = np.abs(area) <= COLLINEAR_REL * diam * diam
        if np.any(degenerate):
            raise MeshError(f"cell {int(ids[_first_true(degenerate)])} is degenerate (zero area)")

        flip = area < 0.0
        if np.any(flip):
            flipped = stack[flip][:, ::-1]
            stack[flip] = flipped
            for row, cid in zip(flipped, ids[flip]):
                cycles[cid] = np.array(row)
            pts = verts[stack]

        _check_simple_group(pts, ids, diam)


def _normalize_tag(raw, edge_key) -> BoundaryTag:
    if isinstance(raw, BoundaryTag):
        tag = raw
    else:
        try:
            tag = BoundaryTag(str(raw))
        except ValueError:
            raise MeshError(f"unknown boundary tag {raw!r} on edge {edge_key}") from None
    if tag is BoundaryTag.INTERIOR:
        raise MeshError(f"boundary edge {edge_key} tagged as interior")
    return tag


def build_topology(
    vertices: Sequence | np.ndarray,
    cells: Iterable[Sequence[int]],
    boundary_tags: TagMap | TagRule,
) -> PolygonalMesh:
    """Validate raw vertex/cell data and construct the edge table.

    Clockwise cells are silently reversed.  Raises :class:`MeshError` (naming
    the offending cell or edge) on degenerate or repeated-vertex cells,
    self-intersecting cycles, non-manifold edges, irreparably inconsistent
    orientation, untagged boundary edges, or an empty spectral boundary.
    """
    verts = np.ascontiguousarray(np.asarray(vertices, dtype=float))
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise MeshError("vertex array must have shape (n, 2)")
    if not np.all(np.isfinite(verts)):
        raise MeshError("vertex coordinates must be finite")
    n_verts = verts.shape[0]

    cycles: list[np.ndarray] = []
    for cid, raw in enumerate(cells):
        cyc = np.asarray(raw, dtype=np.int64)
        if cyc.ndim != 1 or len(cyc) < 3:
            raise MeshError(f"cell {cid} must list at least 3 vertices")
        cycles.append(cyc)
    if not cycles:
        raise MeshError("mesh has no cells")

    entries = np.concatenate(cycles)
    if entries.size and (entries.min() < 0 or entries.max() >= n_verts):
        lengths = np.array([len(c) for c in cycles])
        bad = _first_true((entries < 0) | (entries >= n_verts))
        cid = int(np.searchsorted(np.cumsum(lengths), bad, side="right"))
        raise MeshError(f"cell {cid} references a vertex out of range")

    _validate_cycles(verts, cycles)  # may reverse cycles in place

    # half-edge arrays in cell order
    lengths = np.array([len(c) for c in cycles])
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    tails = np.concatenate(cycles)
    heads = np.empty_like(tails)
    heads[:-1] = tails[1:]
    heads[offsets[1:] - 1] = tails[offsets[:-1]]
    owner = np.repeat(np.arange(len(cycles)), lengths)

    lo = np.minimum(tails, heads)
    hi = np.maximum(tails, heads)
    keys = lo * np.int64(n_verts) + hi
    unique_keys, first_idx, inverse, counts = np.unique(
        keys, return_index=True, return_inverse=True, return_counts=True
    )

    if np.any(counts > 2):
        k = int(unique_keys[_first_true(counts > 2)])
        raise MeshError(
            f"edge ({k // n_verts}, {k % n_verts}) is shared by more than two cells"
        )

    # renumber edges in first-encounter order so edge ids are independent of
    # the key sort
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    halfedge_edge = rank[inverse]

    perm = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)])

    n_edges = len(unique_keys)
    edge_a = np.empty(n_edges, dtype=np.int64)
    edge_b = np.empty(n_edges, dtype=np.int64)
    edge_left = np.empty(n_edges, dtype=np.int64)
    edge_right = np.full(n_edges, -1, dtype=np.int64)

    first_half = perm[starts[:-1]]
    edge_a[rank] = tails[first_half]
    edge_b[rank] = heads[first_half]
    edge_left[rank] = owner[first_half]

    paired = counts == 2
    if np.any(paired):
        paired_ids = np.nonzero(paired)[0]
        second_half = perm[starts[:-1][paired] + 1]
        same_dir = tails[second_half] == tails[first_half[paired]]
        if np.any(same_dir):
            k = _first_true(same_dir)
            h1 = int(first_half[paired][k])
            h2 = int(second_half[k])
            a, b = int(tails[h2]), int(heads[h2])
            raise MeshError(
                f"edge ({min(a, b)}, {max(a, b)}) traversed in the same direction "
                f"by cells {int(owner[h1])} and {int(owner[h2])}: "
                "orientation cannot be repaired"
            )
        edge_right[rank[paired_ids]] = owner[second_half]

    if isinstance(boundary_tags, Mapping):
        lookup = {tuple(sorted(k)): v for k, v in boundary_tags.items()}

        def classify(key, pa, pb):
            if key not in lookup:
                raise MeshError(f"untagged boundary edge {key}")
            return _normalize_tag(lookup[key], key)

    else:

        def classify(key, pa, pb):
            return _normalize_tag(boundary_tags(pa, pb), key)

    tag_order = tuple(BoundaryTag)
    edge_tag = np.zeros(n_edges, dtype=np.int64)
    edges: list[Edge] = []
    edge_index: dict[tuple[int, int], int] = {}
    for eid in range(n_edges):
        a = int(edge_a[eid])
        b = int(edge_b[eid])
        left = int(edge_left[eid])
        right = int(edge_right[eid]) if edge_right[eid] >= 0 else None
        key = (a, b) if a < b else (b, a)
        if right is None:
            tag = classify(key, verts[a], verts[b])
        else:
            tag = BoundaryTag.INTERIOR
        edges.append(Edge(a=a, b=b, left=left, right=right, tag=tag))
        edge_tag[eid] = tag_order.index(tag)
        edge_index[key] = eid

    if not any(e.tag is BoundaryTag.GAMMA0 for e in edges):
        raise MeshError("spectral boundary is empty: no edge tagged gamma0")

    cell_edges = []
    for cid in range(len(cycles)):
        seg = halfedge_edge[offsets[cid]:offsets[cid + 1]].copy()
        seg.flags.writeable = False
        cell_edges.append(seg)

    final_cycles = []
    for cyc in cycles:
        arr = np.ascontiguousarray(cyc)
        arr.flags.writeable = False
        final_cycles.append(arr)

    edge_arrays = {
        "a": edge_a,
        "b": edge_b,
        "left": edge_left,
        "right": edge_right,
        "tag": edge_tag,
    }
    for arr in edge_arrays.values():
        arr.flags.writeable = False

    verts.flags.writeable = False
    return PolygonalMesh(
        vertices=verts,
        cells=tuple(final_cycles),
        edges=tuple(edges),
        cell_edges=tuple(cell_edges),
        _edge_index=edge_index,
        _edge_arrays=edge_arrays,
    )


# ---------------------------------------------------------------------------
# per-element geometry


def element_area(mesh: PolygonalMesh, cell: int) -> float:
    return signed_area(mesh.vertices[mesh.cells[cell]])


def element_centroid(mesh: PolygonalMesh, cell: int) -> np.ndarray:
    return polygon_centroid(mesh.vertices[mesh.cells[cell]])


def element_diameter(mesh: PolygonalMesh, cell: int) -> float:
    return polygon_diameter(mesh.vertices[mesh.cells[cell]])


def sub_triangulate(mesh: PolygonalMesh, cell: int) -> np.ndarray:
    """Fan triangulation (centroid, v_k, v_{k+1}) of one cell, shape (n, 3, 2).

    Raises :class:`MeshError` when the cell is not star-shaped with respect to
    its centroid (some fan triangle would be inverted).
    """
    pts = mesh.vertices[mesh.cells[cell]]
    c = polygon_centroid(pts)
    diam = polygon_diameter(pts)
    n = len(pts)
    tris = np.empty((n, 3, 2))
    for k in range(n):
        tris[k, 0] = c
        tris[k, 1] = pts[k]
        tris[k, 2] = pts[(k + 1) % n]
        if _orient(c, pts[k], pts[(k + 1) % n]) <= -COLLINEAR_REL * diam * diam:
            raise MeshError(f"cell {cell} is not star-shaped with respect to its centroid")
    return tris


@dataclass(frozen=True)
class MeshQualityReport:
    """Shape-regularity diagnostics; thresholds flag cells but never reject them."""

    diameters: np.ndarray
    areas: np.ndarray
    inscribed_radii: np.ndarray      # distance from centroid to nearest boundary edge
    min_vertex_gaps: np.ndarray      # smallest pairwise vertex distance per cell
    gamma: float                     # threshold on inscribed_radius / diameter
    gamma_hat: float                 # threshold on min_vertex_gap / diameter
    star_flags: tuple[int, ...]      # cells with inscribed_radius < gamma * h
    gap_flags: tuple[int, ...]       # cells with min_vertex_gap < gamma_hat * h

    @property
    def gamma_estimate(self) -> float:
        return float(np.min(self.inscribed_radii / self.diameters))

    @property
    def gamma_hat_estimate(self) -> float:
        return float(np.min(self.min_vertex_gaps / self.diameters))


def _point_segment_distance(p, a, b) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a)))
    t = min(1.0, max(0.0, float((p - a) @ ab) / denom))
    closest = a + t * ab
    return float(np.hypot(*(p - closest)))


def quality_report(mesh: PolygonalMesh, gamma: float = 0.1, gamma_hat: float = 0.1) -> MeshQualityReport:
    """Per-cell diameter/area/inscribed-radius/vertex-gap statistics with flags."""
    nc = mesh.n_cells
    diam = np.empty(nc)
    area = np.empty(nc)
    rho = np.empty(nc)
    gap = np.empty(nc)
    for cid, cyc in enumerate(mesh.cells):
        pts = mesh.vertices[cyc]
        n = len(pts)
        diam[cid] = polygon_diameter(pts)
        area[cid] = signed_area(pts)
        c = polygon_centroid(pts)
        rho[cid] = min(
            _point_segment_distance(c, pts[k], pts[(k + 1) % n]) for k in range(n)
        )
        diff = pts[:, None, :] - pts[None, :, :]
        d2 = np.sum(diff * diff, axis=2)
        d2[np.diag_indices(n)] = np.inf
        gap[cid] = math.sqrt(float(np.min(d2)))
    star = tuple(int(i) for i in np.nonzero(rho < gamma * diam)[0])
    gaps = tuple(int(i) for i in np.nonzero(gap < gamma_hat * diam)[0])
    return MeshQualityReport(
        diameters=diam,
        areas=area,
        inscribed_radii=rho,
        min_vertex_gaps=gap,
        gamma=gamma,
        gamma_hat=gamma_hat,
        star_flags=star,
        gap_flags=gaps,
    )


# ---------------------------------------------------------------------------
# JSON I/O


def save_mesh(mesh: PolygonalMesh, path: str | Path) -> None:
    """Write the mesh as JSON: vertices, cell cycles and tagged boundary edges."""
    payload = {
        "vertices": [[float(x), float(y)] for x, y in mesh.vertices],
        "cells": [[int(v) for v in cyc] for cyc in mesh.cells],
        "boundary": [
            {"edge": [e.a, e.b], "tag": e.tag.value}
            for e in mesh.edges
            if e.is_boundary
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_mesh(path: str | Path) -> PolygonalMesh:
    """Read a JSON mesh and run full topology validation on it."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as err:
        raise MeshError(f"malformed mesh file {path}: {err}") from None
    try:
        vertices = payload["vertices"]
        cells = payload["cells"]
        boundary = payload["boundary"]
    except (KeyError, TypeError) as err:
        raise MeshError(f"mesh file {path} is missing field {err}") from None
    tag_map: dict[tuple[int, int], str] = {}
    for item in boundary:
        i, j = item["edge"]
        tag_map[tuple(sorted((int(i), int(j))))] = item["tag"]
    return build_topology(vertices, cells, tag_map)
