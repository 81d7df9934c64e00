import math

import numpy as np
import pytest

from venation.dynamics import SystemParams
from venation.experiments import (
    CHECKPOINT_TIMES,
    AccuracyRow,
    diff_metric,
    difference_run,
    discrepancy_norm,
    ic_recipe,
    initial_condition,
    lookup,
    magnitude_field,
    matched_params,
    pair_error,
    paired_run,
    params_for,
    richardson_study,
    run_test,
)
from venation.experiments import test_catalog as catalog
from venation.grid import make_grid, restrict, tensor_field, vector_field


def test_catalog_has_all_names():
    names = [t.name for t in catalog()]
    for want in ["TestA", "TestB", "TestC", "TestD", "TestE", "TestF", "TestG",
                 "TestH", "TestI", "TestL", "TestM", "TestN", "TestO", "TestD-g175"]:
        assert want in names


def test_catalog_testa_row():
    t = lookup("TestA")
    p = t.params
    assert (p.alpha, p.c, p.D, p.gamma, p.r, p.t_fin) == (0.5, 1.0, 0.01, 0.75, 0.1, 1.0)
    assert t.system == "m"


def test_catalog_testb_testd_rows():
    b = lookup("TestB").params
    assert (b.alpha, b.c, b.D, b.epsilon, b.gamma, b.r, b.t_fin) == (1.0, 1.0, 0.01, 0.1, 1.75, 0.1, 1.0)
    d = lookup("TestD").params
    assert (d.alpha, d.c, d.D, d.epsilon, d.gamma, d.r, d.t_fin) == (0.75, 5.0, 0.01, 1e-3, 0.75, 0.005, 15.0)


def test_catalog_testm_both_sides():
    t = lookup("TestM")
    p, q = t.params, t.params_c
    assert (p.alpha, p.c, p.gamma, p.D, p.epsilon, p.r) == (0.5, 1.0, 0.75, 0.1, 0.1, 0.1)
    assert q is not None
    assert (q.alpha, q.gamma) == (1.0, 1.75)
    assert np.isclose(q.c, math.sqrt(2.0))
    assert t.n == 600 and t.ic == "prepared"


def test_catalog_zero_diffusivity_rows():
    assert lookup("TestN").params.D == 0.0
    assert lookup("TestO").params.D == 1e-5
    g175 = lookup("TestD-g175").params
    assert g175.gamma == 1.75
    assert (g175.alpha, g175.c, g175.D, g175.r) == (0.75, 5.0, 0.01, 0.005)


def test_lookup_unknown_test():
    with pytest.raises(KeyError):
        lookup("TestZ")


def test_initial_conditions_prepared_identity():
    g = make_grid(8)
    m0 = initial_condition("prepared_m", g, bc_mode="steady_state_flux")
    C0 = initial_condition("prepared_c", g, bc_mode="steady_state_flux")
    # C0 = m0 x m0 exactly
    assert np.allclose(C0.c11.values, m0.c1.values * m0.c1.values, atol=1e-16)
    assert np.allclose(C0.c12.values, m0.c1.values * m0.c2.values, atol=1e-16)
    assert np.allclose(C0.c11.values, 0.5)


def test_initial_conditions_ridge_and_norms():
    g = make_grid(9)  # odd n puts a center cell at (0.5, 0.5)
    C0 = initial_condition("ridge_c", g, bc_mode="steady_state_flux")
    mid = g.n // 2
    assert np.isclose(C0.c11.values[mid, mid], 1.0)
    assert np.all(C0.c12.values == 0.0)

    d = initial_condition("default_c", g, bc_mode="steady_state_flux")
    fro = np.sqrt(d.c11.values**2 + 2 * d.c12.values**2 + d.c22.values**2)
    assert np.allclose(fro, np.sqrt(2.0))


def test_initial_conditions_dirichlet_ring_zeroed():
    g = make_grid(8)
    m0 = initial_condition("default_m", g)
    ring = g.boundary_mask()
    assert np.all(m0.c1.values[ring] == 0.0)
    assert np.all(m0.c1.values[~ring] == 1.0)


def test_initial_conditions_steady_state_variants():
    g = make_grid(8)
    m01 = initial_condition("m01", g, bc_mode="steady_state_flux")
    assert np.allclose(m01.c1.values, 1.0) and np.allclose(m01.c2.values, math.sqrt(2.0))
    m02 = initial_condition("m02", g, bc_mode="steady_state_flux")
    assert np.allclose(m02.c1.values, 5.0)
    m03 = initial_condition("m03", g, bc_mode="steady_state_flux")
    assert np.allclose(m03.c1.values, m03.c2.values)


def test_initial_condition_unknown_recipe():
    with pytest.raises(KeyError):
        initial_condition("vortex", make_grid(8))


def test_ic_recipe_resolution():
    assert ic_recipe(lookup("TestD"), "m") == "default_m"
    assert ic_recipe(lookup("TestM"), "C") == "prepared_c"


def test_matched_params_testm_map():
    src = SystemParams(D=0.1, c=1.0, alpha=0.5, gamma=0.75, r=0.1, epsilon=0.1, dt=0.01, t_fin=0.64)
    out = matched_params(src, 1.0)
    assert out.alpha == 1.0
    assert out.gamma == 1.75
    assert np.isclose(out.c, math.sqrt(2.0))
    assert (out.D, out.r, out.epsilon, out.dt, out.t_fin) == (0.1, 0.1, 0.1, 0.01, 0.64)


def test_matched_params_edge_rules():
    src = SystemParams(D=0.1, c=0.0, alpha=0.5, gamma=0.5, r=0.1, dt=0.01)
    out = matched_params(src, 2.0)
    assert out.c == 0.0
    assert out.gamma == 1.5
    with pytest.raises(ValueError):
        matched_params(src, 0.0)


def test_matched_params_affine(rng):
    base = SystemParams(D=0.1, c=1.0, alpha=0.5, gamma=0.75, r=0.1, dt=0.01)
    for _ in range(3):
        a, c = rng.uniform(0.1, 2.0, 2)
        from dataclasses import replace

        out = matched_params(replace(base, alpha=a, c=c), 1.5)
        assert np.isclose(out.alpha, 2 * a)
        assert np.isclose(out.c, math.sqrt(2.0) * c * 1.5)


def test_discrepancy_norm_well_prepared_is_zero(rng):
    g = make_grid(8)
    a = rng.uniform(0.2, 1.0, (8, 8))
    b = rng.uniform(0.2, 1.0, (8, 8))
    m = vector_field(g, a, b)
    C = tensor_field(g, a * a, a * b, b * b)
    assert discrepancy_norm(C, m) == 0.0


def test_discrepancy_norm_simple_value():
    g = make_grid(4)
    one = np.ones((4, 4))
    zero = np.zeros((4, 4))
    m = vector_field(g, one, zero)  # |m x m| = 1 pointwise
    C = tensor_field(g, 2 * one, zero, zero)  # |C| = 2 pointwise
    assert np.isclose(discrepancy_norm(C, m), 1.0)


def test_diff_metric_basics(rng):
    g = make_grid(6)
    a = vector_field(g, rng.standard_normal((6, 6)), rng.standard_normal((6, 6)))
    z = vector_field(g, np.zeros((6, 6)), np.zeros((6, 6)))
    assert diff_metric(a, a) == 0.0
    assert np.isclose(diff_metric(z, a), 1.0)
    with pytest.raises(ValueError):
        diff_metric(a, z)


def test_diff_metric_symmetry_relation(rng):
    g = make_grid(6)
    a = vector_field(g, rng.uniform(0.5, 1.0, (6, 6)), rng.uniform(0.5, 1.0, (6, 6)))
    b = vector_field(g, rng.uniform(0.5, 1.0, (6, 6)), rng.uniform(0.5, 1.0, (6, 6)))
    na = np.sqrt(np.sum(a.c1.values**2 + a.c2.values**2))
    nb = np.sqrt(np.sum(b.c1.values**2 + b.c2.values**2))
    assert np.isclose(diff_metric(a, b) * nb, diff_metric(b, a) * na, rtol=1e-12)


def test_pair_error_identical_runs_is_zero():
    g = make_grid(16)
    f = magnitude_field(run_test(lookup("TestA"), "m", n=16, t_fin=0.1).state)
    fine = make_grid(32)
    inject = np.repeat(np.repeat(f.values, 2, axis=0), 2, axis=1)
    from venation.grid import ScalarField

    assert pair_error(f, ScalarField(fine, inject)) == 0.0


def test_richardson_study_rows_structure():
    rows = richardson_study(lookup("TestA"), [8, 16, 32], system="m")
    assert [r.n for r in rows] == [16, 32]
    assert rows[0].order is None
    assert rows[1].order is not None
    assert all(np.isfinite(r.error) and r.error > 0 for r in rows)


def test_richardson_study_validates_input():
    with pytest.raises(ValueError):
        richardson_study(lookup("TestA"), [8, 24])
    with pytest.raises(ValueError):
        richardson_study(lookup("TestD"), [8, 16])  # system "both" is ambiguous


def test_params_for_ties_dt_to_h():
    p = params_for(lookup("TestD"), "m", 100)
    assert p.dt == 1.0 / 100
    q = params_for(lookup("TestM"), "C", 50)
    assert q.gamma == 1.75  # matched tensor side


def test_paired_run_starts_at_zero_and_interpolates():
    rec = paired_run(lookup("TestM"), n=24, dt=0.01)
    assert rec.discrepancy[0] == 0.0
    assert rec.times[-1] >= 0.64 - 1e-9
    cps = rec.at_checkpoints(CHECKPOINT_TIMES)
    assert len(cps) == 7
    assert cps[0][0] == 0.01
    # interpolated values live between the bracketing samples
    for t, v in cps:
        k = np.searchsorted(rec.times, t)
        lo = min(rec.discrepancy[k - 1], rec.discrepancy[min(k, len(rec.times) - 1)])
        hi = max(rec.discrepancy[k - 1], rec.discrepancy[min(k, len(rec.times) - 1)])
        assert lo - 1e-15 <= v <= hi + 1e-15


def test_difference_run_identical_ics_is_zero():
    params = params_for(lookup("TestD-g175"), "m", 16, t_fin=0.2)
    times, diffs = difference_run(params, "m01", "m01", 16)
    assert np.all(diffs == 0.0)
    assert times[-1] >= 0.2 - 1e-9


def test_accuracy_row_is_frozen():
    row = AccuracyRow(16, 0.1, None)
    with pytest.raises(Exception):
        row.error = 0.2
