import math

import numpy as np
import pytest

from torsionlab import fem
from torsionlab.geometry import Disk, Rectangle, build_mesh, mesh_area


def test_assembly_rejects_nonpositive_beta(disk_mesh_coarse):
    with pytest.raises(ValueError):
        fem.assemble_robin_system(disk_mesh_coarse, 0.0)
    with pytest.raises(ValueError):
        fem.assemble_robin_system(disk_mesh_coarse, -1.0)


def test_system_shape_and_symmetry(disk_mesh_coarse):
    system = fem.assemble_robin_system(disk_mesh_coarse, 1.0)
    n = disk_mesh_coarse.n_vertices
    assert system.matrix.shape == (n, n)
    asym = abs(system.matrix - system.matrix.T).max()
    assert asym < 1e-14


def test_system_positive_definite_dense_oracle():
    mesh = build_mesh(Rectangle(1.0, 1.0), 0.4)
    system = fem.assemble_robin_system(mesh, 1.0)
    eigs = np.linalg.eigvalsh(system.matrix.toarray())
    assert eigs.min() > 0


def test_robin_block_exact_integration():
    # exact integration of products of linear edge functions: beta*L/6*[[2,1],[1,2]]
    mesh = build_mesh(Rectangle(1.0, 1.0), 0.5)
    beta = 2.0
    system = fem.assemble_robin_system(mesh, beta)
    stiff_rows, stiff_cols, stiff_vals = fem.kernels.stiffness_triplets(
        mesh.vertices, mesh.triangles
    )
    import scipy.sparse

    K = scipy.sparse.coo_matrix(
        (stiff_vals, (stiff_rows, stiff_cols)),
        shape=(mesh.n_vertices, mesh.n_vertices),
    ).tocsr()
    B = (system.matrix - K).tocoo()
    dense = np.zeros(K.shape)
    dense[B.row, B.col] = B.data
    for (i, j), L in zip(mesh.boundary_edges, mesh.boundary_lengths()):
        assert dense[i, j] == pytest.approx(beta * L / 6.0, rel=1e-12)
    lengths = mesh.boundary_lengths()
    expected_diag = np.zeros(mesh.n_vertices)
    np.add.at(expected_diag, mesh.boundary_edges[:, 0], beta * lengths / 3.0)
    np.add.at(expected_diag, mesh.boundary_edges[:, 1], beta * lengths / 3.0)
    np.testing.assert_allclose(np.diag(dense), expected_diag, atol=1e-14)


def test_disk_solution_matches_closed_form(disk_field):
    mesh = disk_field.mesh
    r2 = np.einsum("ij,ij->i", mesh.vertices, mesh.vertices)
    exact = (1.0 - r2) / 4.0 + 0.5
    assert np.abs(disk_field.values - exact).max() < 1e-3


def test_flux_identity_all_betas(disk_mesh_coarse):
    area = mesh_area(disk_mesh_coarse)
    for beta in (0.5, 1.0, 2.0):
        field = fem.solve_torsion(disk_mesh_coarse, beta)
        assert abs(fem.flux_residual(field, beta)) <= 1e-11 * area


def test_minimum_attained_on_boundary(disk_field):
    boundary = set(disk_field.mesh.boundary_edges.ravel().tolist())
    assert int(np.argmin(disk_field.values)) in boundary


def test_solution_monotone_in_beta(disk_mesh_coarse):
    fields = [fem.solve_torsion(disk_mesh_coarse, b) for b in (0.5, 1.0, 2.0)]
    assert np.all(fields[0].values > fields[1].values)
    assert np.all(fields[1].values > fields[2].values)


def test_solver_nonconvergence_error(disk_mesh_coarse):
    system = fem.assemble_robin_system(disk_mesh_coarse, 1.0)
    with pytest.raises(fem.SolveError) as err:
        fem.solve(system, fem.SolveOptions(tolerance=1e-14, max_iterations=2))
    assert err.value.residual is not None and err.value.residual > 1e-14


def test_torsional_rigidity_examples(disk_field, square_field):
    # constant field integrates to c*|Omega|
    mesh = disk_field.mesh
    const = fem.ScalarField(mesh, np.full(mesh.n_vertices, 3.0))
    assert fem.torsional_rigidity(const) == pytest.approx(3.0 * mesh_area(mesh), rel=1e-13)
    # disk approaches 5pi/8; equal-area square stays strictly below
    assert fem.torsional_rigidity(disk_field) == pytest.approx(5 * math.pi / 8, rel=2e-3)
    assert fem.torsional_rigidity(square_field) < 5 * math.pi / 8


def test_rigidity_converges_to_closed_form():
    from torsionlab.geometry import refine_uniform

    mesh = build_mesh(Disk(1.0), 0.15)
    gaps = []
    for _ in range(3):
        field = fem.solve_torsion(mesh, 1.0)
        gaps.append(abs(fem.torsional_rigidity(field) - 5 * math.pi / 8))
        mesh = refine_uniform(mesh)
    assert gaps[2] < gaps[1] < gaps[0]


def test_rayleigh_quotient_properties(disk_field):
    mesh = disk_field.mesh
    beta = 1.0
    # the solved field maximizes the quotient, where it equals T
    t = fem.torsional_rigidity(disk_field)
    assert fem.rayleigh_quotient(disk_field, beta) == pytest.approx(t, rel=1e-10)
    # phi = 1: gradient term vanishes, quotient = |Omega|^2 / (beta P)
    ones = fem.ScalarField(mesh, np.ones(mesh.n_vertices))
    from torsionlab.geometry import mesh_perimeter

    expected = mesh_area(mesh) ** 2 / (beta * mesh_perimeter(mesh))
    assert fem.rayleigh_quotient(ones, beta) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(math.pi / 2, rel=1e-3)
    assert expected < 5 * math.pi / 8
    # scale invariance and suboptimality
    assert fem.rayleigh_quotient(
        fem.ScalarField(mesh, -7.5 * disk_field.values), beta
    ) == pytest.approx(t, rel=1e-12)
    with pytest.raises(ZeroDivisionError):
        fem.rayleigh_quotient(fem.ScalarField(mesh, np.zeros(mesh.n_vertices)), beta)


def test_field_extrema(disk_field):
    u_min, u_max = fem.field_extrema(disk_field)
    assert 0 < u_min <= u_max
    assert u_min == pytest.approx(0.5, abs=1e-3)
    assert u_max == pytest.approx(0.75, abs=1e-3)
    mesh = disk_field.mesh
    const = fem.ScalarField(mesh, np.full(mesh.n_vertices, 2.0))
    assert fem.field_extrema(const) == (2.0, 2.0)


def test_field_norms_against_quadrature(x_field):
    # u = x on the unit square: ||u||_1 = 1/2, ||u||_2 = 1/sqrt(3)
    assert fem.field_norm(x_field, 1) == pytest.approx(0.5, rel=1e-12)
    assert fem.field_norm(x_field, 2) == pytest.approx(1 / math.sqrt(3), rel=1e-12)
    with pytest.raises(ValueError):
        fem.field_norm(x_field, 3)


def test_abs_integral_sign_split(unit_square_mesh):
    # u = x - 1/2 on the unit square: ∫|u| = 1/4
    field = fem.ScalarField(unit_square_mesh, unit_square_mesh.vertices[:, 0] - 0.5)
    assert fem.field_abs_integral(field) == pytest.approx(0.25, rel=1e-12)


def test_field_io_roundtrip(tmp_path, disk_field):
    path = tmp_path / "field.txt"
    fem.write_field(path, disk_field)
    back = fem.read_field(path, disk_field.mesh)
    assert np.array_equal(back.values, disk_field.values)
    fem.write_manifest(tmp_path / "m.txt", {"mesh": "mesh.txt", "beta": 1.0, "tol": 1e-12})
    manifest = fem.read_manifest(tmp_path / "m.txt")
    assert manifest == {"mesh": "mesh.txt", "beta": "1.0", "tol": "1e-12"}


def test_field_value_count_checked(disk_mesh_coarse):
    with pytest.raises(ValueError):
        fem.ScalarField(disk_mesh_coarse, np.ones(3))
