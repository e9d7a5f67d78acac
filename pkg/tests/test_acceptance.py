"""Acceptance gate: one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines;
every tolerance is pinned here, none are tuned at runtime.
"""

import math
import time

import numpy as np
import pytest

from torsionlab import comparison as cmp, fem, rearrange as ra
from torsionlab.geometry import (
    Disk,
    Ellipse,
    PerturbedDisk,
    Rectangle,
    build_mesh,
    mesh_area,
    refine_uniform,
    rescaled_to_area,
)

BETAS = (0.5, 1.0, 2.0)
ACCEPTANCE_H = 0.05


def _verdict(num, ok, detail):
    print(f"\n[acceptance {num}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="session")
def test_domains():
    """The four canonical domains at h = 0.05, solved for each beta."""
    specs = {
        "disk": Disk(1.0),
        "ellipse": Ellipse(1.5, 1.0),
        "square": rescaled_to_area(Rectangle(1.0, 1.0), math.pi),
        "perturbed_disk": PerturbedDisk(1.0, 0.2, 3),
    }
    out = {}
    for label, spec in specs.items():
        mesh = build_mesh(spec, ACCEPTANCE_H)
        out[label] = (mesh, {beta: fem.solve_torsion(mesh, beta) for beta in BETAS})
    return out


@pytest.fixture(scope="session")
def disk_fine_field():
    mesh = build_mesh(Disk(1.0), 0.02)
    return fem.solve_torsion(mesh, 1.0)


def test_criterion_1_closed_form_disk_convergence():
    start = time.monotonic()
    rows = cmp.convergence_study(radius=1.0, beta=1.0, h0=0.1, levels=4)
    elapsed = time.monotonic() - start
    slope = cmp.observed_order(rows)
    finest = rows[-1][2]
    detail = (
        f"observed order {slope:.3f} (>= 1.8), finest error {finest:.2e} "
        f"(<= 2e-3), runtime {elapsed:.1f}s (<= 60s)"
    )
    _verdict(1, slope >= 1.8 and finest <= 2e-3 and elapsed <= 60.0, detail)


def test_criterion_2_flux_identity(test_domains):
    worst = 0.0
    for label, (mesh, fields) in test_domains.items():
        area = mesh_area(mesh)
        for beta, field in fields.items():
            worst = max(worst, abs(fem.flux_residual(field, beta)) / area)
    _verdict(2, worst <= 1e-9, f"max relative flux residual {worst:.2e} (<= 1e-9)")


def test_criterion_3_norm_comparison_margins(test_domains):
    ok = True
    details = []
    assert cmp.RadialReference(math.pi, 1.0).norm(1) == pytest.approx(5 * math.pi / 8, rel=1e-12)
    for label in ("square", "ellipse"):
        spec = test_domains[label][0].spec
        spec = rescaled_to_area(spec, math.pi)
        mesh = build_mesh(spec, ACCEPTANCE_H)
        margins = {1: [], 2: []}
        for level in range(2):
            if level:
                mesh = refine_uniform(mesh)
            field = fem.solve_torsion(mesh, 1.0)
            ref = cmp.RadialReference.for_mesh(mesh, 1.0)
            for p in (1, 2):
                record = cmp.norm_comparison(field, ref, p)
                ok &= record.residual < -record.tol  # strictly below
                margins[p].append(record.rhs - record.lhs)
        for p in (1, 2):
            drift = abs(margins[p][1] / margins[p][0] - 1.0)
            ok &= drift <= 0.2
            details.append(f"{label} L{p} margin {margins[p][1]:.4f} drift {drift:.1%}")
    _verdict(3, ok, "; ".join(details))


def test_criterion_4_pointwise_comparison(test_domains, disk_fine_field):
    ok = True
    worst_label = ""
    for label, (mesh, fields) in test_domains.items():
        field = fields[1.0]
        ref = cmp.RadialReference.for_mesh(mesh, 1.0)
        record = cmp.pointwise_comparison(field, ref, n_grid=1000)
        ok &= record.passed
        if not record.passed:
            worst_label = label
    ref = cmp.RadialReference.for_mesh(disk_fine_field.mesh, 1.0)
    prof = ra.decreasing_rearrangement(disk_fine_field)
    s = np.linspace(0.0, ref.area, 1000)
    disk_gap = float(np.abs(prof.evaluate(s) - ref.vstar(s)).max())
    ok &= disk_gap <= 2e-3
    _verdict(
        4,
        ok,
        f"u* <= v* + eps(h) on all domains{' except ' + worst_label if worst_label else ''}; "
        f"disk |u* - v*| max {disk_gap:.2e} (<= 2e-3) at h=0.02",
    )


def test_criterion_5_levelset_lower_bound(test_domains):
    disk_mesh = test_domains["disk"][0]
    radial = cmp.radial_interpolant(disk_mesh, 1.0)
    _, r_radial = cmp.lemma_residual_curve(radial, 1.0)
    radial_dev = float(np.abs(r_radial).max()) / (4 * math.pi)

    ellipse_field = test_domains["ellipse"][1][1.0]
    _, r_ell = cmp.lemma_residual_curve(ellipse_field, 1.0)
    eps = cmp.eps_h(ACCEPTANCE_H, coeff=cmp.LEMMA_COEFF)
    n = len(r_ell)
    mid_min = float(r_ell[n // 3 : 2 * n // 3].min())
    ok = radial_dev <= 0.05 and float(r_ell.min()) >= -eps and mid_min > 0.1
    _verdict(
        5,
        ok,
        f"radial identity deviation {radial_dev:.1%} of 4pi (<= 5%); ellipse residual "
        f"min {r_ell.min():.3f} (>= {-eps:.3f}), mid-level min {mid_min:.3f} (> 0.1)",
    )


def test_criterion_6_minima_and_distribution(test_domains):
    ok = True
    for label, (mesh, fields) in test_domains.items():
        field = fields[1.0]
        ref = cmp.RadialReference.for_mesh(mesh, 1.0)
        ok &= cmp.minima_comparison(field, ref).passed
        ok &= cmp.distribution_comparison(field, ref).passed
        u_min, _ = fem.field_extrema(field)
        area = mesh_area(mesh)
        mu = ra.distribution_many(field, [0.0, 0.5 * u_min, u_min])
        ok &= bool(np.all(np.abs(mu - area) <= 1e-12 * area))
    _verdict(6, ok, "u_m <= v_m + eps, mu <= phi + eps, and mu = |Omega| up to u_m on all domains")


def test_criterion_7_rearrangement_oracles(unit_square_mesh, x_field, radial_field):
    mesh = unit_square_mesh
    ok = True
    # constant field
    const = fem.ScalarField(mesh, np.full(mesh.n_vertices, 2.0))
    area = mesh_area(mesh)
    ok &= abs(ra.distribution(const, 1.0) - area) <= 1e-10
    ok &= ra.distribution(const, 2.0) == 0.0
    ok &= abs(ra.decreasing_rearrangement(const).evaluate(0.5 * area) - 2.0) <= 1e-10
    # u = x on the unit square
    ts = np.linspace(0.02, 0.98, 25)
    mu = ra.distribution_many(x_field, ts)
    lin_err = float(np.abs(mu - (1.0 - ts)).max())
    prof = ra.decreasing_rearrangement(x_field)
    s = np.linspace(0.0, 1.0, 257)
    ustar_err = float(np.abs(prof.evaluate(s) - (1.0 - s)).max())
    ok &= lin_err <= 1e-10 and ustar_err <= 1e-10
    # discrete radial field against the affine profile
    rmesh = radial_field.mesh
    ref = cmp.RadialReference.for_mesh(rmesh, 1.0)
    rprof = ra.decreasing_rearrangement(radial_field)
    ss = np.linspace(0.0, ref.area, 513)
    radial_err = float(np.abs(rprof.evaluate(ss) - ref.vstar(ss)).max())
    ok &= radial_err <= 3 * rmesh.h**2
    # round trip exact at breakpoints
    for field in (x_field, radial_field):
        p = ra.decreasing_rearrangement(field)
        ok &= bool(np.array_equal(p.super_level_measure(p.thresholds), p.mu))
    _verdict(
        7,
        ok,
        f"closed-form errors: linear {lin_err:.1e}, u* {ustar_err:.1e} (<= 1e-10); "
        f"radial {radial_err:.1e} (<= 3h^2 = {3 * rmesh.h**2:.1e}); round trips exact",
    )


def test_criterion_8_rigidity_probe():
    start = time.monotonic()
    h = 0.03
    family = [PerturbedDisk(1.0, e, 3) for e in (0.0, 0.05, 0.1, 0.2)]
    rows = cmp.rigidity_probe(family, 1.0, h)
    eps = cmp.eps_h(h)
    ok = rows[0].deficit <= eps
    ok &= all(a.deficit < b.deficit for a, b in zip(rows, rows[1:]))
    for row in rows[1:]:
        ok &= (row.v_min - row.u_min > eps) or (row.v_max - row.u_max > eps)
    # circle fits on the unperturbed member
    mesh = build_mesh(rescaled_to_area(family[0], math.pi), h)
    field = fem.solve_torsion(mesh, 1.0)
    fits = cmp.level_circle_fits(field, 5)
    max_rms = max(f.rms_residual for f in fits)
    centers = [f.center for f in fits]
    spread = max(float(np.linalg.norm(a - b)) for a in centers for b in centers)
    ok &= max_rms <= 1e-3 and spread <= 1e-3
    elapsed = time.monotonic() - start
    ok &= elapsed <= 300.0
    _verdict(
        8,
        ok,
        f"deficit(0) {rows[0].deficit:.1e} (<= {eps:.1e}), strictly increasing, "
        f"extrema strictly below on perturbed rows; fits rms {max_rms:.1e} "
        f"spread {spread:.1e} (<= 1e-3); runtime {elapsed:.0f}s (<= 300s)",
    )


def test_criterion_9_weighted_boundary_identity(test_domains):
    worst = 0.0
    for label, (mesh, fields) in test_domains.items():
        for beta, field in fields.items():
            record = cmp.weighted_boundary_check(field, beta)
            worst = max(worst, record.residual)
    _verdict(9, worst <= 1e-3, f"max relative deviation {worst:.2e} (<= 1e-3)")
