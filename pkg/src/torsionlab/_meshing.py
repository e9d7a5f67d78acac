"""Frontal-free mesh generator: hex lattice + Delaunay + Laplacian relaxation.

The meshed domain is the polygon spanned by the boundary samples, so the
triangulation is conforming iff (a) every consecutive boundary pair is a
boundary edge of the kept triangulation and (b) the triangle areas sum to
the polygon's shoelace area. Both are checked; on failure the lattice is
retried at a smaller spacing.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .geometry import MeshError, TriangleMesh, _shoelace

_SMOOTH_SWEEPS = 4
_RETRY_FACTORS = (1.0, 0.85, 0.7, 0.55)


def in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd containment test, vectorized over edges, chunked over points."""
    px, py = poly[:, 0], poly[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    out = np.empty(len(points), dtype=bool)
    for lo in range(0, len(points), 4096):
        chunk = points[lo : lo + 4096]
        x = chunk[:, 0][:, None]
        y = chunk[:, 1][:, None]
        straddle = (py <= y) & (qy > y) | (qy <= y) & (py > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = px + (y - py) / (qy - py) * (qx - px)
        crossings = np.sum(straddle & (xint > x), axis=1)
        out[lo : lo + 4096] = crossings % 2 == 1
    return out


def _hex_lattice(bbox, delta: float) -> np.ndarray:
    xmin, ymin, xmax, ymax = bbox
    dy = delta * np.sqrt(3.0) / 2.0
    ys = np.arange(ymin, ymax + dy, dy)
    cols = np.arange(xmin, xmax + delta, delta)
    pts = []
    for j, y in enumerate(ys):
        xs = cols + (delta / 2.0 if j % 2 else 0.0)
        pts.append(np.column_stack([xs, np.full_like(xs, y)]))
    return np.vstack(pts) if pts else np.empty((0, 2))


def _filtered_triangles(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    try:
        tris = Delaunay(points).simplices.astype(np.int64)
    except Exception as exc:
        raise MeshError(f"Delaunay triangulation failed: {exc}") from exc
    cent = points[tris].mean(axis=1)
    return tris[in_polygon(cent, poly)]


def _laplacian_step(points, tris, n_fixed, poly):
    nv = len(points)
    sums = np.zeros((nv, 2))
    counts = np.zeros(nv)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        np.add.at(sums, tris[:, a], points[tris[:, b]])
        np.add.at(sums, tris[:, b], points[tris[:, a]])
        np.add.at(counts, tris[:, a], 1.0)
        np.add.at(counts, tris[:, b], 1.0)
    movable = counts[n_fixed:] > 0
    new = points.copy()
    cand = sums[n_fixed:][movable] / counts[n_fixed:][movable, None]
    ok = in_polygon(cand, poly)
    idx = np.flatnonzero(movable)[ok] + n_fixed
    new[idx] = cand[ok]
    return new


def _offset_ring(boundary: np.ndarray, tree: cKDTree, spacing: float) -> np.ndarray:
    """One layer of points a triangle-height behind the boundary polyline.

    Guarantees near-equilateral boundary-adjacent triangles; without it the
    seam between the boundary and the lattice develops edges ~1.3x too long.
    """
    nxt = np.roll(boundary, -1, axis=0)
    mid = 0.5 * (boundary + nxt)
    d = nxt - boundary
    seg = np.linalg.norm(d, axis=1)
    inward = np.column_stack([-d[:, 1], d[:, 0]]) / seg[:, None]
    ring = mid + inward * (np.sqrt(3.0) / 2.0 * seg)[:, None]
    keep = in_polygon(ring, boundary)
    dist, _ = tree.query(ring)
    keep &= dist >= 0.6 * spacing
    ring = ring[keep]
    if len(ring) > 1:
        # drop near-duplicates where opposite boundary arcs fold together
        pairs = cKDTree(ring).query_pairs(0.5 * spacing, output_type="ndarray")
        if len(pairs):
            drop = np.zeros(len(ring), dtype=bool)
            drop[pairs[:, 1]] = True
            ring = ring[~drop]
    return ring


def triangulate(spec, boundary: np.ndarray, h_target: float) -> TriangleMesh:
    nb = len(boundary)
    seg = np.linalg.norm(np.roll(boundary, -1, axis=0) - boundary, axis=1)
    spacing = float(seg.mean())
    area = _shoelace(boundary)
    if area <= 0:
        raise MeshError("boundary polyline is not counter-clockwise")
    tree = cKDTree(np.vstack([boundary, 0.5 * (boundary + np.roll(boundary, -1, axis=0))]))
    bbox = (
        boundary[:, 0].min(),
        boundary[:, 1].min(),
        boundary[:, 0].max(),
        boundary[:, 1].max(),
    )

    last_error = None
    for factor in _RETRY_FACTORS:
        # seam edges between the offset ring and the lattice stretch to
        # ~1.3*delta under Laplacian equilibrium; budget for that
        delta = min(spacing, 0.75 * h_target) * factor
        ring = _offset_ring(boundary, tree, spacing * factor)
        lattice = _hex_lattice(bbox, delta)
        if len(lattice):
            keep = in_polygon(lattice, boundary)
            dist, _ = tree.query(lattice)
            keep &= dist >= np.sqrt(3.0) / 2.0 * spacing + 0.5 * delta
            lattice = lattice[keep]
        points = np.vstack([boundary, ring, lattice])
        try:
            tris = _filtered_triangles(points, boundary)
            for _ in range(_SMOOTH_SWEEPS):
                if len(points) == nb:
                    break
                points = _laplacian_step(points, tris, nb, boundary)
                tris = _filtered_triangles(points, boundary)
            # a handful of seam edges may still exceed the target; bisect them
            for _ in range(3):
                long_edges = _overlong_edges(points, tris, h_target)
                if not len(long_edges):
                    break
                mids = 0.5 * (points[long_edges[:, 0]] + points[long_edges[:, 1]])
                points = np.vstack([points, mids])
                tris = _filtered_triangles(points, boundary)
                points = _laplacian_step(points, tris, nb, boundary)
                tris = _filtered_triangles(points, boundary)
            mesh = _compact_and_finalize(points, tris, nb, spec)
            _check_conforming(mesh, nb, area)
            if mesh.h > h_target * (1 + 1e-12):
                raise MeshError(
                    f"max edge {mesh.h:g} exceeds target {h_target:g}"
                )
            mesh.validate()
            return mesh
        except MeshError as exc:
            last_error = exc
    raise MeshError(f"mesh generation failed for {spec.label()}: {last_error}")


def _overlong_edges(points, tris, h_target):
    directed = tris[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    edges = np.unique(np.sort(directed, axis=1), axis=0)
    lengths = np.linalg.norm(points[edges[:, 1]] - points[edges[:, 0]], axis=1)
    return edges[lengths > h_target]


def _compact_and_finalize(points, tris, nb, spec) -> TriangleMesh:
    if len(tris) == 0:
        raise MeshError("no triangles inside the domain")
    used = np.zeros(len(points), dtype=bool)
    used[tris.ravel()] = True
    if not used[:nb].all():
        raise MeshError("boundary vertex lost during triangulation")
    remap = -np.ones(len(points), dtype=np.int64)
    remap[used] = np.arange(used.sum())
    return finalize_mesh(points[used], remap[tris], spec)


def _check_conforming(mesh: TriangleMesh, nb: int, polygon_area: float) -> None:
    expected = np.sort(
        np.column_stack([np.arange(nb), (np.arange(nb) + 1) % nb]), axis=1
    )
    got = np.sort(mesh.boundary_edges, axis=1)
    if len(got) != nb:
        raise MeshError("boundary of triangulation does not match the polyline")
    order_e = np.lexsort((expected[:, 1], expected[:, 0]))
    order_g = np.lexsort((got[:, 1], got[:, 0]))
    if not np.array_equal(expected[order_e], got[order_g]):
        raise MeshError("boundary of triangulation does not match the polyline")
    if abs(float(mesh.triangle_areas().sum()) - polygon_area) > 1e-9 * polygon_area:
        raise MeshError("triangulation does not cover the polygon exactly")


def finalize_mesh(vertices, triangles, spec) -> TriangleMesh:
    """Orient triangles CCW, extract directed boundary edges and outward
    normals, and measure h. Shared by the generator and uniform refinement."""
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    p = vertices[triangles]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    flip = area2 < 0
    if flip.any():
        triangles = triangles.copy()
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
    if np.any(area2 == 0):
        raise MeshError("degenerate (zero-area) triangle")

    directed = triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    key = np.sort(directed, axis=1)
    uniq, inverse, counts = np.unique(
        key, axis=0, return_inverse=True, return_counts=True
    )
    boundary = directed[counts[inverse] == 1]
    order = np.lexsort((boundary[:, 1], boundary[:, 0]))
    boundary = boundary[order]
    d = vertices[boundary[:, 1]] - vertices[boundary[:, 0]]
    lengths = np.linalg.norm(d, axis=1)
    if np.any(lengths == 0):
        raise MeshError("zero-length boundary edge")
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]

    p = vertices[triangles]
    h = float(np.linalg.norm(p[:, [1, 2, 0], :] - p, axis=2).max())
    return TriangleMesh(vertices, triangles, boundary, normals, h, spec=spec)
