"""Exact level-set machinery for piecewise-linear fields.

Distribution functions and level-set areas are computed by clipping the
linear interpolant triangle by triangle (closed-form piecewise quadratics,
no sampling), so the monotone structure needed by the comparison
inequalities survives at roundoff accuracy. Super-level boundary integrals
of 1/u use the closed-form logarithm per boundary sub-segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .fem import ScalarField
from .geometry import mesh_area

__all__ = [
    "DistributionProfile",
    "RearrangementProfile",
    "LevelSetGeometry",
    "CircleFit",
    "distribution",
    "distribution_many",
    "distribution_profile",
    "decreasing_rearrangement",
    "schwartz_value",
    "rearranged_norm",
    "level_set_geometry",
    "isoperimetric_residual",
    "exterior_reciprocal_integral",
    "exterior_reciprocal_many",
    "circle_fit",
]


def _tri_weights(field: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    return field.triangle_values(), field.mesh.triangle_areas()


def distribution_many(field: ScalarField, thresholds, weights=None) -> np.ndarray:
    """Exact measure of {u > t} for an array of thresholds.

    With `weights` (one per triangle) returns the weighted measure
    sum_T w_T |T ∩ {u > t}| instead, which turns the same kernel into the
    coarea workhorse (w = |∇u| gives band integrals of the gradient).
    """
    vals, areas = _tri_weights(field)
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=np.float64))
    w = areas if weights is None else areas * np.asarray(weights, dtype=np.float64)
    order = np.argsort(thresholds, kind="stable")
    out = np.empty_like(thresholds)
    out[order] = kernels.superlevel_areas(vals, w, thresholds[order])
    return out


def distribution(field: ScalarField, t: float) -> float:
    """Exact area of the super-level set {u > t}."""
    return float(distribution_many(field, [t])[0])


@dataclass(frozen=True)
class DistributionProfile:
    """Distribution function tabulated exactly at the distinct vertex values.

    Between breakpoints the exact function is piecewise quadratic; the
    tabulated nodes are exact, and evaluation interpolates linearly, which
    is what the generalized-inverse machinery needs (exactness at nodes,
    monotonicity everywhere).
    """

    thresholds: np.ndarray = field(repr=False)  # ascending distinct values
    mu: np.ndarray = field(repr=False)          # exact mu at each threshold
    total_area: float

    def __post_init__(self):
        for name in ("thresholds", "mu"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def evaluate(self, t) -> np.ndarray:
        """Monotone interpolation of mu; exact at breakpoints, |Ω| below the
        minimum value, 0 at and above the maximum."""
        t = np.asarray(t, dtype=np.float64)
        return np.interp(t, self.thresholds, self.mu, left=self.total_area, right=0.0)

    def to_csv(self, path) -> None:
        _write_csv(path, "t,mu", self.thresholds, self.mu)


def distribution_profile(field: ScalarField) -> DistributionProfile:
    tvals = np.unique(field.values)
    total = mesh_area(field.mesh)
    mu = distribution_many(field, tvals)
    # scrub the roundoff of the sweep accumulation: mu is non-increasing,
    # bounded by |Ω|, and exactly zero at the maximum value
    mu = np.maximum(np.minimum.accumulate(np.minimum(mu, total)), 0.0)
    mu[-1] = 0.0
    return DistributionProfile(tvals, mu, total)


@dataclass(frozen=True)
class RearrangementProfile:
    """Generalized inverse u*(s) = sup{t : mu(t) > s} on [0, |Ω|]."""

    thresholds: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    total_area: float

    def __post_init__(self):
        for name in ("thresholds", "mu"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def max_value(self) -> float:
        return float(self.thresholds[-1])

    @property
    def min_value(self) -> float:
        return float(self.thresholds[0])

    def evaluate(self, s):
        """u*(s); rejects arguments outside [0, |Ω|]."""
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        if np.any(s < 0.0) or np.any(s > self.total_area * (1 + 1e-12)):
            raise ValueError("rearrangement argument outside [0, |Omega|]")
        t, mu = self.thresholds, self.mu
        # mu is non-increasing; find the first index with mu[idx] <= s
        idx = np.searchsorted(-mu, -s, side="left")
        out = np.empty_like(s)
        out[idx == 0] = t[0]  # plateau of u at its minimum
        inner = idx > 0
        ii = idx[inner]
        drop = mu[ii - 1] - mu[ii]  # > 0: searchsorted lands on strict drops
        # anchor at the right node so u*(mu(t_i)) == t_i exactly
        frac = (s[inner] - mu[ii]) / drop
        out[inner] = t[ii] - frac * (t[ii] - t[ii - 1])
        return float(out[0]) if scalar else out

    __call__ = evaluate

    def super_level_measure(self, t) -> np.ndarray:
        """|{s : u*(s) > t}|; reproduces mu exactly at the breakpoints."""
        t = np.asarray(t, dtype=np.float64)
        return np.interp(t, self.thresholds, self.mu, left=self.total_area, right=0.0)

    def to_csv(self, path, n: int = 512) -> None:
        s = np.linspace(0.0, self.total_area, n)
        _write_csv(path, "s,u_star", s, self.evaluate(s))


def decreasing_rearrangement(field: ScalarField) -> RearrangementProfile:
    prof = distribution_profile(field)
    return RearrangementProfile(prof.thresholds, prof.mu, prof.total_area)


def schwartz_value(profile: RearrangementProfile, x) -> float:
    """u♯(x) = u*(π|x|²) on the equal-area disk centered at the origin."""
    s = np.pi * float(np.dot(x, x))
    if s > profile.total_area * (1 + 1e-12):
        raise ValueError("point lies outside the equal-area disk")
    return float(profile.evaluate(min(s, profile.total_area)))


def rearranged_norm(field: ScalarField, p: int) -> float:
    """Lp norm of u* on (0, |Ω|) via the layer-cake formula.

    ∫ (u*)^p ds = ∫₀^∞ p t^(p-1) mu(t) dt, integrated exactly: mu is
    piecewise quadratic between distinct vertex values, so 2-point Gauss
    per breakpoint interval is exact for p in {1, 2}. Requires u >= 0.
    """
    if p not in (1, 2):
        raise ValueError("only p = 1 and p = 2 are supported")
    if field.values.min() < 0:
        raise ValueError("rearranged norms are defined for non-negative fields")
    tvals = np.unique(field.values)
    total = mesh_area(field.mesh)
    out = total * tvals[0] ** p  # mu = |Ω| on [0, t_min)
    if len(tvals) > 1:
        left, right = tvals[:-1], tvals[1:]
        half = 0.5 * (right - left)
        midp = 0.5 * (right + left)
        nodes = np.concatenate(
            [midp - half / np.sqrt(3.0), midp + half / np.sqrt(3.0)]
        )
        mu = distribution_many(field, nodes)
        integrand = mu if p == 1 else 2.0 * nodes * mu
        gauss = np.sum((integrand[: len(left)] + integrand[len(left) :]) * half)
        out += gauss
    return out if p == 1 else float(np.sqrt(out))


# ---------------------------------------------------------------------------
# level-set geometry


@dataclass(frozen=True)
class LevelSetGeometry:
    """Boundary of a super-level set {u > t}, split into the interior
    contour and the portion living on ∂Ω."""

    threshold: float
    contours: list            # interior polylines, each an (k, 2) array
    boundary_portions: list   # sub-segments of ∂Ω, each an (k, 2) array
    interior_perimeter: float
    exterior_length: float
    enclosed_area: float

    def contour_points(self) -> np.ndarray:
        pieces = [c for c in self.contours if len(c)] + [
            b for b in self.boundary_portions if len(b)
        ]
        if not pieces:
            return np.empty((0, 2))
        return np.unique(np.vstack(pieces), axis=0)


def _edge_key(i: int, j: int, nv: int) -> int:
    return (i * nv + j) if i < j else (j * nv + i)


def level_set_geometry(field: ScalarField, t: float) -> LevelSetGeometry:
    """Trace {u = t} by marching triangles and clip ∂Ω against the values.

    Requires min(u) < t < max(u) strictly; outside that open range the
    level set is everything or nothing and there is no contour to trace.
    """
    lo, hi = float(field.values.min()), float(field.values.max())
    if not (lo < t < hi):
        raise ValueError(f"threshold {t} outside the open value range ({lo}, {hi})")

    mesh = field.mesh
    nv = mesh.n_vertices
    tris = mesh.triangles
    vals = field.values
    above = vals > t

    # crossing point per cut edge, computed once from the (lo, hi) vertex
    # order so adjacent triangles see bit-identical coordinates
    pattern = above[tris]
    cut_count = pattern.sum(axis=1)
    mixed = (cut_count == 1) | (cut_count == 2)
    segments = []
    crossings: dict[int, np.ndarray] = {}

    def crossing(i: int, j: int) -> int:
        key = _edge_key(i, j, nv)
        if key not in crossings:
            a, b = (i, j) if i < j else (j, i)
            theta = (t - vals[a]) / (vals[b] - vals[a])
            crossings[key] = mesh.vertices[a] + theta * (
                mesh.vertices[b] - mesh.vertices[a]
            )
        return key

    for tri in tris[mixed]:
        cut = []
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            if above[a] != above[b]:
                cut.append(crossing(int(a), int(b)))
        segments.append((cut[0], cut[1]))

    contours = _chain_segments(segments, crossings)
    interior_perimeter = sum(
        float(np.linalg.norm(np.diff(c, axis=0), axis=1).sum()) for c in contours
    )

    portions = []
    exterior_length = 0.0
    for (i, j) in mesh.boundary_edges:
        vi, vj = vals[i], vals[j]
        if vi > t and vj > t:
            seg = np.vstack([mesh.vertices[i], mesh.vertices[j]])
        elif vi > t:
            seg = np.vstack([mesh.vertices[i], _edge_point(mesh, vals, t, i, j)])
        elif vj > t:
            seg = np.vstack([_edge_point(mesh, vals, t, i, j), mesh.vertices[j]])
        else:
            continue
        portions.append(seg)
        exterior_length += float(np.linalg.norm(seg[1] - seg[0]))

    area = distribution(field, t)
    return LevelSetGeometry(
        t, contours, portions, interior_perimeter, exterior_length, area
    )


def _edge_point(mesh, vals, t, i, j):
    # same (lo, hi) evaluation order as the interior crossings, so shared
    # endpoints between contour and boundary portions are bit-identical
    a, b = (i, j) if i < j else (j, i)
    theta = (t - vals[a]) / (vals[b] - vals[a])
    return mesh.vertices[a] + theta * (mesh.vertices[b] - mesh.vertices[a])


def _chain_segments(segments, crossings) -> list:
    """Join crossing-key segments into polylines (loops or open chains)."""
    incident: dict[int, list] = {}
    for idx, (p, q) in enumerate(segments):
        incident.setdefault(p, []).append(idx)
        incident.setdefault(q, []).append(idx)
    used = [False] * len(segments)
    polylines = []

    def walk(start_key):
        chain = [start_key]
        key = start_key
        while True:
            nxt = None
            for idx in incident[key]:
                if not used[idx]:
                    nxt = idx
                    break
            if nxt is None:
                break
            used[nxt] = True
            p, q = segments[nxt]
            key = q if p == key else p
            chain.append(key)
        return chain

    # open chains first (endpoints of odd degree), then leftover loops
    for key, inc in incident.items():
        if len(inc) % 2 == 1 and any(not used[i] for i in inc):
            polylines.append(walk(key))
    for idx in range(len(segments)):
        if not used[idx]:
            polylines.append(walk(segments[idx][0]))
    return [
        np.vstack([crossings[k] for k in chain])
        for chain in polylines
        if len(chain) >= 2
    ]


def isoperimetric_residual(field: ScalarField, t: float) -> float:
    """P(U_t) - 2√π·mu(t)^(1/2); non-negative up to O(h), zero on disks."""
    geo = level_set_geometry(field, t)
    perimeter = geo.interior_perimeter + geo.exterior_length
    return perimeter - 2.0 * np.sqrt(np.pi * geo.enclosed_area)


def exterior_reciprocal_many(field: ScalarField, thresholds) -> np.ndarray:
    """∫ 1/u over {u > t} ∩ ∂Ω for an array of thresholds."""
    bv = field.boundary_values()
    lengths = field.mesh.boundary_lengths()
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=np.float64))
    order = np.argsort(thresholds, kind="stable")
    out = np.empty_like(thresholds)
    _, rec = kernels.boundary_superlevel(bv, lengths, thresholds[order])
    out[order] = rec
    return out


def exterior_reciprocal_integral(field: ScalarField, t: float) -> float:
    """∫_{∂U_t ∩ ∂Ω} 1/u dH¹; zero when the level set avoids the boundary."""
    hi = float(field.values.max())
    if not 0.0 <= t < hi:
        raise ValueError(f"threshold {t} outside [0, max value)")
    return float(exterior_reciprocal_many(field, [t])[0])


# ---------------------------------------------------------------------------
# circle fitting (rigidity probe)


@dataclass(frozen=True)
class CircleFit:
    center: np.ndarray
    radius: float
    rms_residual: float  # RMS radial misfit normalized by the radius


def circle_fit(geometry: LevelSetGeometry) -> CircleFit:
    """Algebraic least-squares circle through the level-set contour."""
    pts = geometry.contour_points()
    if len(pts) < 3:
        raise ValueError("need at least 3 contour points to fit a circle")
    x, y = pts[:, 0], pts[:, 1]
    A = np.column_stack([2 * x, 2 * y, np.ones(len(pts))])
    rhs = x**2 + y**2
    coef, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < 3:
        raise ValueError("degenerate circle fit: contour points are collinear")
    center = coef[:2]
    r2 = coef[2] + center @ center
    if r2 <= 0:
        raise ValueError("degenerate circle fit")
    radius = float(np.sqrt(r2))
    dist = np.linalg.norm(pts - center, axis=1)
    rms = float(np.sqrt(np.mean((dist - radius) ** 2))) / radius
    return CircleFit(center, radius, rms)


def _write_csv(path, header: str, *columns) -> None:
    rows = zip(*columns)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
