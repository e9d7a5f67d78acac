"""Planar Lipschitz domains and conforming triangulations.

Domain kinds: disk, ellipse, axis-aligned rectangle, simple polygon, and a
cosine-perturbed disk r(theta) = R + eps*cos(k*theta). Curved boundaries
are discretized as inscribed polylines whose vertices lie exactly on the
true curve, and every downstream functional works on the polygon actually
meshed, so the discrete area is the reference measure throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainError",
    "MeshError",
    "DomainSpec",
    "Disk",
    "Ellipse",
    "Rectangle",
    "Polygon",
    "PerturbedDisk",
    "TriangleMesh",
    "build_mesh",
    "mesh_area",
    "mesh_perimeter",
    "refine_uniform",
    "write_mesh",
    "read_mesh",
    "parse_domain",
    "rescaled_to_area",
]


class DomainError(ValueError):
    """Invalid domain description."""


class MeshError(RuntimeError):
    """Mesh generation failed or produced an invalid triangulation."""


class DomainSpec:
    """Base interface for parametric domain descriptions."""

    def analytic_area(self) -> float:
        raise NotImplementedError

    def boundary_points(self, h: float) -> np.ndarray:
        """Counter-clockwise boundary polyline with spacing <= h, vertices
        exactly on the true boundary curve."""
        raise NotImplementedError

    def project_to_boundary(self, points: np.ndarray) -> np.ndarray:
        """Map near-boundary points onto the true curve (used when refining
        curved domains; polygonal kinds return the points unchanged)."""
        return np.asarray(points, dtype=float)

    def centroid(self) -> np.ndarray:
        raise NotImplementedError

    def radial_profile(self, theta: np.ndarray) -> np.ndarray:
        """Distance from the centroid to the boundary along direction theta.

        Only meaningful for domains that are star-shaped about their
        centroid, which covers every built-in kind used in sweeps.
        """
        raise NotImplementedError

    def scaled(self, factor: float) -> "DomainSpec":
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError


def _fmt(x: float) -> str:
    return f"{x:g}"


@dataclass(frozen=True)
class Disk(DomainSpec):
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("disk radius must be positive")

    def analytic_area(self):
        return math.pi * self.radius**2

    def boundary_points(self, h):
        n = _min_count(2 * math.pi * self.radius, h)
        theta = 2 * math.pi * np.arange(n) / n
        return self.radius * np.column_stack([np.cos(theta), np.sin(theta)])

    def project_to_boundary(self, points):
        p = np.asarray(points, dtype=float)
        r = np.linalg.norm(p, axis=-1, keepdims=True)
        return self.radius * p / r

    def centroid(self):
        return np.zeros(2)

    def radial_profile(self, theta):
        return np.full_like(np.asarray(theta, dtype=float), self.radius)

    def scaled(self, factor):
        return Disk(self.radius * factor)

    def label(self):
        return f"disk:{_fmt(self.radius)}"


@dataclass(frozen=True)
class Ellipse(DomainSpec):
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("ellipse semi-axes must be positive")

    def analytic_area(self):
        return math.pi * self.a * self.b

    def _curve(self, theta):
        return np.column_stack([self.a * np.cos(theta), self.b * np.sin(theta)])

    def boundary_points(self, h):
        return _arclength_sample(self._curve, h)

    def project_to_boundary(self, points):
        p = np.asarray(points, dtype=float)
        t = 1.0 / np.sqrt((p[..., 0] / self.a) ** 2 + (p[..., 1] / self.b) ** 2)
        return p * t[..., None]

    def centroid(self):
        return np.zeros(2)

    def radial_profile(self, theta):
        th = np.asarray(theta, dtype=float)
        return self.a * self.b / np.sqrt(
            (self.b * np.cos(th)) ** 2 + (self.a * np.sin(th)) ** 2
        )

    def scaled(self, factor):
        return Ellipse(self.a * factor, self.b * factor)

    def label(self):
        return f"ellipse:{_fmt(self.a)},{_fmt(self.b)}"


@dataclass(frozen=True)
class Rectangle(DomainSpec):
    """Axis-aligned rectangle [0, width] x [0, height]."""

    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise DomainError("rectangle sides must be positive")

    def analytic_area(self):
        return self.width * self.height

    def boundary_points(self, h):
        w, ht = self.width, self.height
        corners = [(0.0, 0.0), (w, 0.0), (w, ht), (0.0, ht)]
        return _subdivide_loop(np.array(corners), h)

    def centroid(self):
        return np.array([self.width / 2, self.height / 2])

    def radial_profile(self, theta):
        th = np.asarray(theta, dtype=float)
        cx, cy = np.cos(th), np.sin(th)
        with np.errstate(divide="ignore"):
            rx = np.where(cx != 0, (self.width / 2) / np.abs(cx), np.inf)
            ry = np.where(cy != 0, (self.height / 2) / np.abs(cy), np.inf)
        return np.minimum(rx, ry)

    def scaled(self, factor):
        return Rectangle(self.width * factor, self.height * factor)

    def label(self):
        return f"rect:{_fmt(self.width)},{_fmt(self.height)}"


@dataclass(frozen=True)
class Polygon(DomainSpec):
    """Simple polygon with counter-clockwise vertices."""

    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise DomainError("polygon needs at least 3 planar vertices")
        if _shoelace(v) <= 0:
            raise DomainError("polygon vertices must be counter-clockwise")
        if _self_intersects(v):
            raise DomainError("polygon is self-intersecting")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def analytic_area(self):
        return _shoelace(self.vertices)

    def boundary_points(self, h):
        return _subdivide_loop(self.vertices, h)

    def centroid(self):
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]
        return (v + w).T @ cross / (6.0 * _shoelace(v))

    def radial_profile(self, theta):
        # ray casting from the centroid; assumes the polygon is star-shaped
        c = self.centroid()
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        d = np.column_stack([np.cos(th), np.sin(th)])
        a = self.vertices - c
        b = np.roll(self.vertices, -1, axis=0) - c
        e = b - a
        out = np.empty(len(th))
        for i, di in enumerate(d):
            denom = di[0] * e[:, 1] - di[1] * e[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                s = (a[:, 0] * e[:, 1] - a[:, 1] * e[:, 0]) / -denom
                u = (a[:, 0] * di[1] - a[:, 1] * di[0]) / -denom
            hit = (denom != 0) & (u >= 0.0) & (u <= 1.0) & (s > 0.0)
            out[i] = s[hit].min() if hit.any() else np.nan
        return out if np.ndim(theta) else out[0]

    def scaled(self, factor):
        return Polygon(np.asarray(self.vertices) * factor)

    def label(self):
        return f"polygon:{len(self.vertices)}v"


@dataclass(frozen=True)
class PerturbedDisk(DomainSpec):
    """Boundary r(theta) = radius + amplitude * cos(mode * theta)."""

    radius: float
    amplitude: float
    mode: int

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("perturbed disk radius must be positive")
        if self.amplitude < 0 or self.amplitude >= self.radius:
            raise DomainError("perturbation amplitude must lie in [0, radius)")
        if self.amplitude > 0.3 * self.radius:
            raise DomainError("perturbation amplitude capped at 0.3*radius")
        if self.mode < 2:
            raise DomainError("perturbation mode must be >= 2")

    def analytic_area(self):
        return math.pi * (self.radius**2 + self.amplitude**2 / 2.0)

    def _r(self, theta):
        return self.radius + self.amplitude * np.cos(self.mode * theta)

    def _curve(self, theta):
        r = self._r(theta)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    def boundary_points(self, h):
        return _arclength_sample(self._curve, h)

    def project_to_boundary(self, points):
        p = np.asarray(points, dtype=float)
        theta = np.arctan2(p[..., 1], p[..., 0])
        r = self._r(theta)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)

    def centroid(self):
        return np.zeros(2)

    def radial_profile(self, theta):
        return self._r(np.asarray(theta, dtype=float))

    def scaled(self, factor):
        return PerturbedDisk(self.radius * factor, self.amplitude * factor, self.mode)

    def label(self):
        return f"perturbed_disk:{_fmt(self.radius)},{_fmt(self.amplitude)},{self.mode}"


def _shoelace(v: np.ndarray) -> float:
    w = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]))


def _self_intersects(v: np.ndarray) -> bool:
    n = len(v)
    segs = [(v[i], v[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # adjacent segments share an endpoint
            if _segments_cross(*segs[i], *segs[j]):
                return True
    return False


def _segments_cross(p, q, r, s) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p, q, r), orient(p, q, s)
    d3, d4 = orient(r, s, p), orient(r, s, q)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _min_count(arclength: float, h: float) -> int:
    if h <= 0:
        raise ValueError("h_target must be positive")
    n = int(math.ceil(arclength / h))
    if n < 3:
        raise ValueError(
            f"h_target={h:g} leaves fewer than 3 boundary vertices on a loop "
            f"of length {arclength:g}"
        )
    return n


def _arclength_sample(curve, h: float, dense: int = 8192) -> np.ndarray:
    """Sample a closed parametric curve at (near) equal arclength spacing <= h."""
    theta = 2 * math.pi * np.arange(dense + 1) / dense
    pts = curve(theta)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    n = _min_count(total, h)
    targets = total * np.arange(n) / n
    th = np.interp(targets, s, theta)
    return curve(th)


def _subdivide_loop(corners: np.ndarray, h: float) -> np.ndarray:
    """Insert points along each polygon edge so spacing <= h; corners kept."""
    if h <= 0:
        raise ValueError("h_target must be positive")
    out = []
    n = len(corners)
    for i in range(n):
        p, q = corners[i], corners[(i + 1) % n]
        m = max(1, int(math.ceil(np.linalg.norm(q - p) / h)))
        frac = np.arange(m) / m
        out.append(p + frac[:, None] * (q - p))
    return np.vstack(out)


# ---------------------------------------------------------------------------
# triangle mesh


@dataclass(frozen=True)
class TriangleMesh:
    """Conforming triangulation with oriented boundary edges.

    vertices : (nv, 2) float64
    triangles : (nt, 3) int64, counter-clockwise
    boundary_edges : (nb, 2) int64, directed so the domain lies on the left
    boundary_normals : (nb, 2) float64 outward unit normals
    h : max edge length
    spec : generating domain, kept for boundary re-projection on refinement
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_normals: np.ndarray
    h: float
    spec: DomainSpec | None = None

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "boundary_normals"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        )

    def boundary_lengths(self) -> np.ndarray:
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e = p[:, [1, 2, 0], :] - p
        return np.linalg.norm(e, axis=2).ravel()

    def translated(self, offset) -> "TriangleMesh":
        """Copy with shifted vertices; drops the spec (projection would lie)."""
        return TriangleMesh(
            self.vertices + np.asarray(offset, dtype=float),
            self.triangles,
            self.boundary_edges,
            self.boundary_normals,
            self.h,
            spec=None,
        )

    def validate(self) -> None:
        """Assert the structural invariants; raises MeshError on violation."""
        areas = self.triangle_areas()
        if not np.all(areas > 0):
            raise MeshError("triangle with non-positive signed area")
        # each boundary edge belongs to exactly one triangle
        tri_edges = np.sort(
            self.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1
        )
        uniq, counts = np.unique(tri_edges, axis=0, return_counts=True)
        border = uniq[counts == 1]
        ours = np.unique(np.sort(self.boundary_edges, axis=1), axis=0)
        if border.shape != ours.shape or not np.array_equal(border, ours):
            raise MeshError("boundary edge list does not match the triangulation")
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        # closed loops: every boundary vertex has one incoming, one outgoing edge
        src, dst = self.boundary_edges[:, 0], self.boundary_edges[:, 1]
        if (
            len(np.unique(src)) != len(src)
            or len(np.unique(dst)) != len(dst)
            or not np.array_equal(np.sort(src), np.sort(dst))
        ):
            raise MeshError("boundary edges do not form closed loops")
        # outward normals
        mids = 0.5 * (self.vertices[src] + self.vertices[dst])
        owner = _boundary_owner_triangles(self)
        cent = self.vertices[self.triangles[owner]].mean(axis=1)
        if not np.all(np.einsum("ij,ij->i", self.boundary_normals, mids - cent) > 0):
            raise MeshError("boundary normal points inward")
        norms = np.linalg.norm(self.boundary_normals, axis=1)
        if not np.allclose(norms, 1.0, rtol=0, atol=1e-12):
            raise MeshError("boundary normal not unit length")


def _boundary_owner_triangles(mesh: TriangleMesh) -> np.ndarray:
    """Index of the unique triangle adjacent to each boundary edge."""
    tri_edges = np.sort(mesh.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
    order = np.lexsort((tri_edges[:, 1], tri_edges[:, 0]))
    sorted_edges = tri_edges[order]
    targets = np.sort(mesh.boundary_edges, axis=1)
    pos = np.searchsorted(
        sorted_edges[:, 0] * (mesh.n_vertices + 1) + sorted_edges[:, 1],
        targets[:, 0] * (mesh.n_vertices + 1) + targets[:, 1],
    )
    return order[pos] // 3


def mesh_area(mesh: TriangleMesh) -> float:
    """Lebesgue measure of the meshed polygon (sum of triangle areas)."""
    return float(mesh.triangle_areas().sum())


def mesh_perimeter(mesh: TriangleMesh) -> float:
    """Length of the boundary polyline."""
    return float(mesh.boundary_lengths().sum())


def build_mesh(spec: DomainSpec, h_target: float) -> TriangleMesh:
    """Triangulate a domain with maximum edge length <= h_target.

    The boundary polyline has vertices exactly on the true curve; the
    interior is filled from a hexagonal lattice, Delaunay-triangulated and
    relaxed by a few Laplacian sweeps. Raises ValueError for degenerate
    specs or an h_target so coarse that a loop gets fewer than 3 vertices,
    and MeshError if no conforming triangulation is obtained.
    """
    from . import _meshing

    if h_target <= 0:
        raise ValueError("h_target must be positive")
    # sample slightly finer than the target: the seam between the boundary
    # layer and the interior lattice stretches edges by up to ~15%
    boundary = spec.boundary_points(0.85 * h_target)
    if len(boundary) < 3:
        raise ValueError("fewer than 3 boundary vertices")
    return _meshing.triangulate(spec, boundary, h_target)


def refine_uniform(mesh: TriangleMesh) -> TriangleMesh:
    """Split every triangle into 4 via edge midpoints.

    Midpoints of boundary edges are re-projected onto the true boundary
    curve when the mesh remembers a curved spec, so refined meshes keep
    their boundary vertices exactly on the curve.
    """
    nv = mesh.n_vertices
    tris = mesh.triangles
    edges = np.sort(tris[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    mid = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])

    if mesh.spec is not None:
        bset = {tuple(e) for e in np.sort(mesh.boundary_edges, axis=1).tolist()}
        is_boundary = np.array([tuple(e) in bset for e in uniq.tolist()])
        if is_boundary.any():
            mid[is_boundary] = mesh.spec.project_to_boundary(mid[is_boundary])

    new_vertices = np.vstack([mesh.vertices, mid])
    mid_idx = (nv + inverse).reshape(-1, 3)  # midpoint of (0,1), (1,2), (2,0)
    m01, m12, m20 = mid_idx[:, 0], mid_idx[:, 1], mid_idx[:, 2]
    i, j, k = tris[:, 0], tris[:, 1], tris[:, 2]
    children = np.concatenate(
        [
            np.stack([i, m01, m20], axis=1),
            np.stack([j, m12, m01], axis=1),
            np.stack([k, m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    from . import _meshing

    return _meshing.finalize_mesh(new_vertices, children, mesh.spec)


# ---------------------------------------------------------------------------
# plain-text mesh format


def write_mesh(path, mesh: TriangleMesh) -> None:
    """Write the plain-text format: counts, vertices, triangles, boundary.

    Floats carry 17 significant digits so read_mesh round-trips every
    double bit-identically.
    """
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [
        f"{i} {j} {nx:.17g} {ny:.17g}"
        for (i, j), (nx, ny) in zip(mesh.boundary_edges, mesh.boundary_normals)
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> TriangleMesh:
    with open(path) as fh:
        tokens = fh.read().split("\n")
    nv, nt, nb = (int(x) for x in tokens[0].split())
    vertices = np.array(
        [[float(v) for v in line.split()] for line in tokens[1 : 1 + nv]]
    )
    triangles = np.array(
        [[int(v) for v in line.split()] for line in tokens[1 + nv : 1 + nv + nt]],
        dtype=np.int64,
    )
    rows = [line.split() for line in tokens[1 + nv + nt : 1 + nv + nt + nb]]
    boundary_edges = np.array([[int(r[0]), int(r[1])] for r in rows], dtype=np.int64)
    boundary_normals = np.array([[float(r[2]), float(r[3])] for r in rows])
    p = vertices[triangles]
    e = np.linalg.norm(p[:, [1, 2, 0], :] - p, axis=2)
    mesh = TriangleMesh(
        vertices, triangles, boundary_edges, boundary_normals, float(e.max())
    )
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# CLI grammar


def parse_domain(text: str) -> DomainSpec:
    """Parse 'disk:R | ellipse:a,b | rect:w,h | polygon:@file |
    perturbed_disk:R,eps,k'."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "disk":
            return Disk(float(rest))
        if kind == "ellipse":
            a, b = (float(v) for v in rest.split(","))
            return Ellipse(a, b)
        if kind == "rect":
            w, h = (float(v) for v in rest.split(","))
            return Rectangle(w, h)
        if kind == "perturbed_disk":
            r, eps, k = rest.split(",")
            return PerturbedDisk(float(r), float(eps), int(k))
        if kind == "polygon":
            if not rest.startswith("@"):
                raise DomainError("polygon domains are given as polygon:@file")
            verts = np.loadtxt(rest[1:], ndmin=2)
            return Polygon(verts)
    except DomainError:
        raise
    except (ValueError, OSError) as exc:
        raise DomainError(f"cannot parse domain {text!r}: {exc}") from exc
    raise DomainError(f"unknown domain kind {kind!r}")


def rescaled_to_area(spec: DomainSpec, target_area: float) -> DomainSpec:
    """Similarity copy of the domain with the requested analytic area."""
    return spec.scaled(math.sqrt(target_area / spec.analytic_area()))
