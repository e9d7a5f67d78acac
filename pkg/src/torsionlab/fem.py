"""Discrete Robin torsion problem on piecewise-linear elements.

Assembles the bilinear form ∫∇u·∇φ + β∮uφ against the unit load, solves it
with Jacobi-preconditioned conjugate gradients, and evaluates the energy
functionals (torsional rigidity, Rayleigh quotient, Lp norms) by exact
per-triangle integration of the linear interpolant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from . import kernels
from .geometry import TriangleMesh

__all__ = [
    "ScalarField",
    "SparseSystem",
    "SolveOptions",
    "SolveError",
    "DiscretizationError",
    "assemble_robin_system",
    "solve",
    "solve_torsion",
    "torsional_rigidity",
    "rayleigh_quotient",
    "field_extrema",
    "field_norm",
    "boundary_integral",
    "flux_residual",
    "write_field",
    "read_field",
    "write_manifest",
    "read_manifest",
]


class SolveError(RuntimeError):
    """Iterative solver failed to reach the requested residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DiscretizationError(RuntimeError):
    """Solution violates a structural property (e.g. positivity)."""


@dataclass(frozen=True)
class ScalarField:
    """Piecewise-linear function given by one value per mesh vertex."""

    mesh: TriangleMesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != (self.mesh.n_vertices,):
            raise ValueError("value count must equal vertex count")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def triangle_values(self) -> np.ndarray:
        return self.values[self.mesh.triangles]

    def gradients(self) -> np.ndarray:
        """Constant gradient per triangle, shape (nt, 2)."""
        p = self.mesh.vertices[self.mesh.triangles]
        v = self.triangle_values()
        e = p[:, [2, 0, 1], :] - p[:, [1, 2, 0], :]  # edge opposite vertex i
        area2 = e[:, 1, 0] * e[:, 2, 1] - e[:, 1, 1] * e[:, 2, 0]
        # grad λ_i = perp(e_i) / (2A) with perp(x, y) = (-y, x)
        gx = np.sum(-e[:, :, 1] * v, axis=1) / area2
        gy = np.sum(e[:, :, 0] * v, axis=1) / area2
        return np.column_stack([gx, gy])

    def boundary_values(self) -> np.ndarray:
        return self.values[self.mesh.boundary_edges]


@dataclass(frozen=True)
class SparseSystem:
    """Symmetric positive definite Robin system in CSR storage."""

    matrix: scipy.sparse.csr_matrix = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    beta: float
    mesh: TriangleMesh = field(repr=False)


@dataclass(frozen=True)
class SolveOptions:
    tolerance: float = 1e-12
    max_iterations: int | None = None  # defaults to 20 * n_vertices

    def __post_init__(self):
        if not 0.0 < self.tolerance < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def assemble_robin_system(mesh: TriangleMesh, beta: float) -> SparseSystem:
    """Discretize -Δu = 1 with the Robin condition du/dν + βu = 0.

    Interior stiffness plus the exactly integrated boundary mass βL/6·[[2,1],
    [1,2]] per boundary edge; load vector is the exact integral of each hat
    function. Rejects β <= 0, where the operator loses definiteness.
    """
    if beta <= 0:
        raise ValueError("Robin parameter beta must be positive")
    nv = mesh.n_vertices
    rows, cols, vals = kernels.stiffness_triplets(mesh.vertices, mesh.triangles)

    be = mesh.boundary_edges
    lengths = mesh.boundary_lengths()
    brows = np.concatenate([be[:, 0], be[:, 1], be[:, 0], be[:, 1]])
    bcols = np.concatenate([be[:, 0], be[:, 1], be[:, 1], be[:, 0]])
    bvals = beta * np.concatenate(
        [lengths / 3.0, lengths / 3.0, lengths / 6.0, lengths / 6.0]
    )

    matrix = scipy.sparse.coo_matrix(
        (np.concatenate([vals, bvals]), (np.concatenate([rows, brows]), np.concatenate([cols, bcols]))),
        shape=(nv, nv),
    ).tocsr()

    load = np.zeros(nv)
    np.add.at(load, mesh.triangles.ravel(), np.repeat(mesh.triangle_areas() / 3.0, 3))
    return SparseSystem(matrix, load, beta, mesh)


def solve(system: SparseSystem, options: SolveOptions | None = None) -> ScalarField:
    """CG solve of the Robin system down to the requested relative residual.

    Raises SolveError (carrying the final residual) when the iteration
    budget runs out, and DiscretizationError if the computed field is not
    strictly positive, which signals a mesh too coarse for the data.
    """
    options = options or SolveOptions()
    maxiter = options.max_iterations or 20 * system.mesh.n_vertices
    mat = system.matrix
    x, relres, iterations, converged = kernels.cg_csr(
        mat.indptr,
        mat.indices,
        mat.data,
        mat.diagonal(),
        system.rhs,
        options.tolerance,
        maxiter,
    )
    if not converged:
        raise SolveError(
            f"CG did not reach {options.tolerance:g} within {maxiter} iterations "
            f"(relative residual {relres:.3e})",
            residual=relres,
            iterations=iterations,
        )
    if np.min(x) <= 0.0:
        raise DiscretizationError(
            "solved torsion field is not strictly positive; mesh too coarse"
        )
    return ScalarField(system.mesh, x)


def solve_torsion(
    mesh: TriangleMesh, beta: float, options: SolveOptions | None = None
) -> ScalarField:
    return solve(assemble_robin_system(mesh, beta), options)


def torsional_rigidity(field: ScalarField) -> float:
    """Integral of the field over the mesh (the L1 functional T)."""
    areas = field.mesh.triangle_areas()
    return float(np.sum(areas * field.triangle_values().mean(axis=1)))


def field_extrema(field: ScalarField) -> tuple[float, float]:
    return float(field.values.min()), float(field.values.max())


def _positive_part_integral(values3: np.ndarray, areas: np.ndarray) -> float:
    """Exact ∫ max(u, 0), via the layer-cake identity ∫u⁺ = ∫₀^∞ |{u > t}| dt.

    The per-triangle superlevel-area fraction is the standard piecewise
    quadratic in t; its antiderivative is integrated in closed form with
    the lower limit clamped into each piece.
    """
    s = np.sort(values3, axis=1)
    a, b, c = s[:, 0], s[:, 1], s[:, 2]
    t1 = np.clip(0.0, a, b)
    t2 = np.clip(0.0, b, c)
    top = np.where(c > b, (c - t2) ** 3 / (3.0 * np.where(c > b, (c - b) * (c - a), 1.0)), 0.0)
    d1 = np.where(b > a, (b - a) * (c - a), 1.0)
    mid = np.where(b > a, (b - t1) - ((b - a) ** 3 - (t1 - a) ** 3) / (3.0 * d1), 0.0)
    low = np.maximum(a, 0.0)
    return float(np.sum(areas * (top + mid + low)))


def field_abs_integral(field: ScalarField) -> float:
    """Exact ∫|u| over the mesh."""
    v = field.triangle_values()
    areas = field.mesh.triangle_areas()
    return _positive_part_integral(v, areas) + _positive_part_integral(-v, areas)


def field_norm(field: ScalarField, p: int) -> float:
    """Exact Lp norm of the interpolant, p in {1, 2}."""
    v = field.triangle_values()
    areas = field.mesh.triangle_areas()
    if p == 1:
        return field_abs_integral(field)
    if p == 2:
        v1, v2, v3 = v[:, 0], v[:, 1], v[:, 2]
        sq = (v1**2 + v2**2 + v3**2 + v1 * v2 + v1 * v3 + v2 * v3) / 6.0
        return float(np.sqrt(np.sum(areas * sq)))
    raise ValueError("only p = 1 and p = 2 are supported")


def rayleigh_quotient(field: ScalarField, beta: float) -> float:
    """(∫|φ|)² / (∫|∇φ|² + β∮φ²) for a trial field on its own mesh."""
    num = field_abs_integral(field) ** 2
    grads = field.gradients()
    areas = field.mesh.triangle_areas()
    dirichlet = float(np.sum(areas * np.einsum("ij,ij->i", grads, grads)))
    bv = field.boundary_values()
    lengths = field.mesh.boundary_lengths()
    robin = beta * float(
        np.sum(lengths * (bv[:, 0] ** 2 + bv[:, 0] * bv[:, 1] + bv[:, 1] ** 2) / 3.0)
    )
    den = dirichlet + robin
    if den == 0.0:
        raise ZeroDivisionError("Rayleigh quotient of the zero field")
    return num / den


def boundary_integral(field: ScalarField) -> float:
    """Exact ∮ u dH¹ over the boundary polyline."""
    bv = field.boundary_values()
    lengths = field.mesh.boundary_lengths()
    return float(np.sum(lengths * bv.mean(axis=1)))


def flux_residual(field: ScalarField, beta: float) -> float:
    """β∮u - |Ω_h|; zero (to solver tolerance) for the discrete solution."""
    from .geometry import mesh_area

    return beta * boundary_integral(field) - mesh_area(field.mesh)


# ---------------------------------------------------------------------------
# field files: "nv" then one value per line, 17 significant digits


def write_field(path, field: ScalarField) -> None:
    lines = [str(field.mesh.n_vertices)]
    lines += [f"{v:.17g}" for v in field.values]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path, mesh: TriangleMesh) -> ScalarField:
    with open(path) as fh:
        tokens = fh.read().split()
    nv = int(tokens[0])
    if nv != mesh.n_vertices:
        raise ValueError(f"field has {nv} values but mesh has {mesh.n_vertices}")
    return ScalarField(mesh, np.array([float(t) for t in tokens[1 : 1 + nv]]))


def write_manifest(path, entries: dict) -> None:
    """Plain 'key = value' text pairing a field file with its inputs."""
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key} = {value}\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed manifest line: {line!r}")
            out[key.strip()] = value.strip()
    return out
