import json
import math

import numpy as np
import pytest

from torsionlab import comparison as cmp, fem, rearrange as ra
from torsionlab.geometry import (
    Disk,
    Ellipse,
    PerturbedDisk,
    build_mesh,
    mesh_area,
    rescaled_to_area,
)


def test_radial_value_examples():
    ref = cmp.RadialReference(math.pi, 1.0)
    assert ref.radial_value(0.0) == pytest.approx(0.75, rel=1e-14)
    assert ref.radial_value(1.0) == pytest.approx(0.5, rel=1e-14)
    assert ref.v_min == pytest.approx(0.5, rel=1e-14)
    assert ref.v_max == pytest.approx(0.75, rel=1e-14)
    with pytest.raises(ValueError):
        ref.radial_value(1.5)
    # beta -> infinity recovers the Dirichlet paraboloid
    stiff = cmp.RadialReference(math.pi, 1e12)
    r = 0.3
    assert stiff.radial_value(r) == pytest.approx((math.pi - math.pi * r**2) / (4 * math.pi), rel=1e-9)


def test_vstar_endpoints_and_consistency(rng):
    ref = cmp.RadialReference(math.pi, 1.0)
    assert ref.vstar(ref.area) == pytest.approx(ref.v_min, rel=1e-14)
    assert ref.vstar(0.0) == pytest.approx(ref.v_max, rel=1e-14)
    for r in rng.uniform(0, ref.radius, 10):
        assert ref.vstar(math.pi * r**2) == pytest.approx(ref.radial_value(r), rel=1e-13)
    with pytest.raises(ValueError):
        ref.vstar(-0.5)


def test_radial_norms_against_quadrature():
    from scipy.integrate import quad

    ref = cmp.RadialReference(math.pi, 1.0)
    v = lambda r: (ref.area - math.pi * r**2) / (4 * math.pi) + ref.v_min
    want1 = quad(lambda r: 2 * math.pi * r * v(r), 0, ref.radius, epsabs=1e-13)[0]
    want2 = math.sqrt(quad(lambda r: 2 * math.pi * r * v(r) ** 2, 0, ref.radius, epsabs=1e-13)[0])
    assert ref.norm(1) == pytest.approx(want1, rel=1e-12)
    assert ref.norm(2) == pytest.approx(want2, rel=1e-12)
    assert ref.norm(1) == pytest.approx(5 * math.pi / 8, rel=1e-12)


def test_pointwise_comparison_disk_equality_case(disk_field):
    ref = cmp.RadialReference.for_mesh(disk_field.mesh, 1.0)
    record = cmp.pointwise_comparison(disk_field, ref)
    assert record.passed
    assert abs(record.residual) < 1e-3
    # two-sided closeness: |u* - v*| small on the whole grid
    prof = ra.decreasing_rearrangement(disk_field)
    s = np.linspace(0, ref.area, 1000)
    assert np.abs(prof.evaluate(s) - ref.vstar(s)).max() < 1e-3


def test_pointwise_comparison_strict_on_ellipse(ellipse_field):
    ref = cmp.RadialReference.for_mesh(ellipse_field.mesh, 1.0)
    record = cmp.pointwise_comparison(ellipse_field, ref)
    assert record.passed
    prof = ra.decreasing_rearrangement(ellipse_field)
    s = np.linspace(0, ref.area, 1000)[1:-1]
    gap = ref.vstar(s) - prof.evaluate(s)
    assert gap.min() > 0  # strictly below everywhere in the interior


def test_norm_comparison(disk_field, ellipse_field, square_field):
    for field, strict in ((disk_field, False), (ellipse_field, True), (square_field, True)):
        ref = cmp.RadialReference.for_mesh(field.mesh, 1.0)
        for p in (1, 2):
            record = cmp.norm_comparison(field, ref, p)
            assert record.passed
            if strict:
                assert record.residual < -10 * record.tol
    with pytest.raises(ValueError):
        cmp.norm_comparison(disk_field, cmp.RadialReference.for_mesh(disk_field.mesh, 1.0), 3)


def test_minima_comparison(disk_field, ellipse_field):
    ref = cmp.RadialReference.for_mesh(disk_field.mesh, 1.0)
    rec = cmp.minima_comparison(disk_field, ref)
    assert rec.passed and abs(rec.residual) < 1e-3
    ref_e = cmp.RadialReference.for_mesh(ellipse_field.mesh, 1.0)
    rec_e = cmp.minima_comparison(ellipse_field, ref_e)
    assert rec_e.passed and rec_e.lhs < 0.5  # strictly below the disk value


def test_distribution_comparison(disk_field, square_field):
    for field in (disk_field, square_field):
        ref = cmp.RadialReference.for_mesh(field.mesh, 1.0)
        assert cmp.distribution_comparison(field, ref).passed
    # below v_m both distributions fill the whole domain
    u_min, _ = fem.field_extrema(square_field)
    area = mesh_area(square_field.mesh)
    mu = ra.distribution_many(square_field, [0.25 * u_min, u_min])
    np.testing.assert_allclose(mu, area, rtol=1e-13)
    # strict drop below the radial profile on a middle band
    ref = cmp.RadialReference.for_mesh(square_field.mesh, 1.0)
    ts = np.linspace(ref.v_min + 0.02, ref.v_min + 0.1, 9)
    phi = np.clip(area - 4 * math.pi * (ts - ref.v_min), 0, area)
    mu_band = ra.distribution_many(square_field, ts)
    assert np.all(mu_band < phi - 1e-2)


def test_lemma_residuals_radial_and_ellipse(radial_field, ellipse_field):
    # the radial field satisfies the identity within 5% of 4pi on the grid
    _, r = cmp.lemma_residual_curve(radial_field, 1.0)
    assert np.abs(r).max() <= 0.05 * 4 * math.pi
    # the ellipse satisfies the one-sided bound and is strict on mid-levels
    rec = cmp.lemma_residuals(ellipse_field, 1.0)
    assert rec.passed
    _, re = cmp.lemma_residual_curve(ellipse_field, 1.0)
    n = len(re)
    assert re[n // 3 : 2 * n // 3].min() > 0.1


def test_flux_and_weighted_identity(disk_field, ellipse_field, square_field):
    for field in (disk_field, ellipse_field, square_field):
        assert cmp.flux_check(field, 1.0).passed
        rec = cmp.weighted_boundary_check(field, 1.0)
        assert rec.passed and rec.residual < 1e-6


def test_weighted_identity_analytic_radial(radial_field):
    # for the radial interpolant the weighted integral collapses to
    # v_m * P / 2, which matches |Omega|/(2 beta) up to the polygon deficit
    rec = cmp.weighted_boundary_check(radial_field, 1.0)
    assert rec.residual < 1e-3


def test_standard_checks_report(ellipse_field):
    report = cmp.standard_checks(ellipse_field, 1.0)
    assert report.all_pass
    names = {c.name for c in report.checks}
    assert {
        "flux-identity",
        "minima",
        "norm-L1",
        "norm-L2",
        "pointwise",
        "distribution",
        "levelset-lower-bound",
        "weighted-boundary-identity",
    } <= names
    payload = json.loads(report.to_json())
    assert payload["meta"]["beta"] == 1.0
    assert all(set(c) == {"name", "anchor", "lhs", "rhs", "residual", "tol", "pass"} for c in payload["checks"])
    csv_text = report.to_csv()
    assert csv_text.splitlines()[0] == "name,anchor,lhs,rhs,residual,tol,pass"
    assert len(csv_text.splitlines()) == len(report.checks) + 1


def test_domain_asymmetry():
    assert cmp.domain_asymmetry(Disk(2.0)) == pytest.approx(0.0, abs=1e-12)
    a_small = cmp.domain_asymmetry(PerturbedDisk(1.0, 0.05, 3))
    a_big = cmp.domain_asymmetry(PerturbedDisk(1.0, 0.2, 3))
    assert 0 < a_small < a_big
    ell = cmp.domain_asymmetry(Ellipse(1.5, 1.0))
    assert ell > 0.1


def test_rigidity_probe_smoke():
    rows = cmp.rigidity_probe([Disk(1.0), Ellipse(1.25, 1.0)], 1.0, 0.08, n_grid=400)
    assert rows[0].asymmetry < rows[1].asymmetry
    assert rows[0].deficit < rows[1].deficit
    assert all(row.deficit >= -1e-12 for row in rows)
    csv_text = cmp.probe_rows_to_csv(rows)
    assert csv_text.splitlines()[0] == "asymmetry,deficit,min_gap,u_m,v_m,u_M,v_M"
    with pytest.raises(ValueError):
        cmp.rigidity_probe([], 1.0, 0.1)


def test_convergence_study_runs():
    rows = cmp.convergence_study(h0=0.15, levels=3)
    errs = [r[2] for r in rows]
    assert errs[2] < errs[1] < errs[0]
    assert cmp.observed_order(rows) > 1.5


def test_radial_interpolant_consistency(disk_mesh):
    field = cmp.radial_interpolant(disk_mesh, 1.0)
    ref = cmp.RadialReference.for_mesh(disk_mesh, 1.0)
    u_min, u_max = fem.field_extrema(field)
    assert u_min == pytest.approx(ref.v_min, rel=1e-12)
    assert u_max <= ref.v_max
    # boundary vertices carry exactly v_m
    bidx = np.unique(disk_mesh.boundary_edges)
    assert np.abs(field.values[bidx] - ref.v_min).max() < 1e-15
