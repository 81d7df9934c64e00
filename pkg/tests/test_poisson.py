import numpy as np
import pytest

from conftest import compatible_source, dense_pin_and_shift, random_spd_perm, zeroed_ring
from venation.errors import EllipticityError
from venation.grid import (
    ScalarField,
    constant_field,
    make_grid,
    rel_l2_error,
    tensor_field,
    vector_field,
)
from venation.poisson import (
    OFFSETS,
    assemble,
    make_source,
    permeability_from_c,
    permeability_from_m,
    solve_pressure,
)


def identity_perm(n):
    g = make_grid(n)
    z = np.zeros((n, n))
    return permeability_from_c(tensor_field(g, z, z, z), 1.0)


def test_permeability_from_m_values():
    g = make_grid(4)
    m = vector_field(g, np.ones((4, 4)), np.ones((4, 4)))
    perm = permeability_from_m(m, 0.1)
    assert np.allclose(perm.p11.values, 1.1)
    assert np.allclose(perm.p12.values, 1.0)
    assert np.allclose(perm.p22.values, 1.1)

    z = vector_field(g, np.zeros((4, 4)), np.zeros((4, 4)))
    perm0 = permeability_from_m(z, 0.1)
    assert np.allclose(perm0.p11.values, 0.1)
    assert np.all(perm0.p12.values == 0.0)

    s = np.sqrt(2.0) / 2.0
    mprep = vector_field(g, np.full((4, 4), s), np.full((4, 4), s))
    p = permeability_from_m(mprep, 0.1)
    assert np.allclose(p.p11.values, 0.6)
    assert np.allclose(p.p12.values, 0.5)
    assert np.allclose(p.p22.values, 0.6)


def test_permeability_from_c_values():
    g = make_grid(4)
    zero = np.zeros((4, 4))
    one = np.ones((4, 4))
    assert np.allclose(permeability_from_c(tensor_field(g, zero, zero, zero), 0.3).p11.values, 0.3)
    diag = permeability_from_c(tensor_field(g, one, zero, one), 0.1)
    assert np.allclose(diag.p11.values, 1.1)
    assert np.all(diag.p12.values == 0.0)
    assert np.allclose(diag.p22.values, 1.1)


@pytest.mark.parametrize("builder", [permeability_from_m, permeability_from_c])
def test_permeability_rejects_bad_background(builder):
    g = make_grid(4)
    z = np.zeros((4, 4))
    field = vector_field(g, z, z) if builder is permeability_from_m else tensor_field(g, z, z, z)
    with pytest.raises(ValueError):
        builder(field, 0.0)


def test_assemble_identity_reduces_to_five_point():
    n = 8
    op = assemble(identity_perm(n))
    h2 = (1.0 / n) ** 2
    st = op.stencil
    assert np.allclose(st["c"][1:-1, 1:-1], 4.0 / h2)
    assert np.allclose(st["e"][1:-1, 1:-1], -1.0 / h2)
    assert np.allclose(st["n"][1:-1, 1:-1], -1.0 / h2)
    for key in ("ne", "nw", "se", "sw"):
        assert np.all(st[key] == 0.0)
    assert op.symmetric


def test_assemble_zero_offdiagonal_has_no_corners(rng):
    n = 8
    g = make_grid(n)
    c11 = rng.uniform(0.5, 2.0, (n, n))
    c22 = rng.uniform(0.5, 2.0, (n, n))
    op = assemble(permeability_from_c(tensor_field(g, c11, np.zeros((n, n)), c22), 0.2))
    for key in ("ne", "nw", "se", "sw"):
        assert np.all(op.stencil[key] == 0.0)
    assert op.symmetric


def test_assemble_rejects_nonpositive_diagonal():
    g = make_grid(4)
    c11 = np.full((4, 4), -2.0)
    with pytest.raises(EllipticityError):
        assemble(permeability_from_c(tensor_field(g, c11, np.zeros((4, 4)), np.zeros((4, 4))), 0.5))


def test_interior_row_sums_zero(rng):
    op = assemble(random_spd_perm(8, 0.3, rng))
    rows = op.row_sums()
    scale = np.abs(op.stencil["c"]).max()
    assert np.abs(rows).max() <= 1e-12 * scale


def test_kernel_and_conservation(rng):
    for _ in range(5):
        op = assemble(random_spd_perm(16, 0.1, rng))
        n = op.grid.n
        scale = np.abs(op.stencil["c"]).max()
        # constants in the kernel, at boundary cells included
        assert np.abs(op.apply(np.ones((n, n)))).max() <= 1e-12 * scale
        # global conservation for arbitrary fields
        p = rng.standard_normal((n, n))
        out = op.apply(p)
        assert abs(out.sum()) <= 1e-12 * np.abs(out).sum()


def test_out_of_range_coefficients_are_zero(rng):
    op = assemble(random_spd_perm(8, 0.3, rng))
    n = 8
    for key, (di, dj) in OFFSETS.items():
        coef = op.stencil[key]
        if di > 0:
            assert np.all(coef[-1, :] == 0.0)
        if di < 0:
            assert np.all(coef[0, :] == 0.0)
        if dj > 0:
            assert np.all(coef[:, -1] == 0.0)
        if dj < 0:
            assert np.all(coef[:, 0] == 0.0)


def test_solve_zero_source_returns_zero():
    op = assemble(identity_perm(8))
    p = solve_pressure(op, constant_field(make_grid(8), 0.0))
    assert np.all(p.values == 0.0)


def test_solve_rejects_incompatible_source():
    op = assemble(identity_perm(8))
    with pytest.raises(ValueError):
        solve_pressure(op, constant_field(make_grid(8), 1.0))


def test_manufactured_solution_second_order():
    errs = []
    for n in (16, 32, 64):
        g = make_grid(n)
        op = assemble(identity_perm(n))
        X, Y = g.meshgrid()
        pstar = np.cos(np.pi * X) * np.cos(np.pi * Y)
        source = ScalarField(g, 2.0 * np.pi**2 * pstar)
        p = solve_pressure(op, source, tol=1e-12)
        errs.append(rel_l2_error(p, ScalarField(g, pstar - pstar.mean())))
    orders = [np.log2(errs[k - 1] / errs[k]) for k in range(1, len(errs))]
    assert all(abs(o - 2.0) <= 0.2 for o in orders)


@pytest.mark.parametrize("n", [8, 12])
def test_dense_oracle_equivalence(n, rng):
    perm = random_spd_perm(n, 0.2, rng)
    op = assemble(perm)
    source = compatible_source(make_grid(n), rng)
    p = solve_pressure(op, source, tol=1e-12)
    p_dense = dense_pin_and_shift(op, source.values)
    rel = np.linalg.norm(p.values - p_dense) / np.linalg.norm(p_dense)
    assert rel <= 1e-10
    assert abs(p.values.mean()) <= 1e-13


def test_solution_residual_and_mean(rng):
    n = 24
    perm = random_spd_perm(n, 0.05, rng)
    op = assemble(perm)
    source = compatible_source(make_grid(n), rng)
    tol = 1e-10
    p = solve_pressure(op, source, tol=tol)
    res = np.linalg.norm(op.apply(p.values) - (source.values - source.values.mean()))
    assert res <= tol * np.linalg.norm(source.values)
    assert abs(p.values.mean()) <= 1e-13


def test_swap_symmetric_data_gives_swap_symmetric_pressure(rng):
    # perm with p11(x,y) = p22(y,x), p12 symmetric under the swap
    n = 16
    g = make_grid(n)
    base = rng.uniform(0.5, 1.5, (n, n))
    sym = 0.2 * (base + base.T) / 2.0
    c11 = zeroed_ring(base)
    c22 = zeroed_ring(base.T)
    c12 = zeroed_ring(sym)
    perm = permeability_from_c(tensor_field(g, c11, c12, c22), 0.4)
    op = assemble(perm)
    s = rng.standard_normal((n, n))
    s = s + s.T
    s -= s.mean()
    p = solve_pressure(op, ScalarField(g, s), tol=1e-12)
    assert np.abs(p.values - p.values.T).max() <= 1e-9 * np.abs(p.values).max()


def test_make_source_is_compatible_and_peaked():
    g = make_grid(64)
    src = make_source(g, 1000.0, (0.1, 0.1))
    assert abs(src.values.mean()) <= 1e-14 * np.abs(src.values).max()
    i, j = np.unravel_index(np.argmax(src.values), src.values.shape)
    c = g.centers()
    d = np.hypot(c[i] - 0.1, c[j] - 0.1)
    dmin = np.abs(c - 0.1).min()
    assert d <= np.hypot(dmin, dmin) + 1e-12


def test_make_source_flat_limit():
    g = make_grid(16)
    src = make_source(g, 1e-12, (0.1, 0.1))
    assert np.abs(src.values).max() <= 1e-11


def test_make_source_rejects_bad_sigma():
    with pytest.raises(ValueError):
        make_source(make_grid(8), 0.0)
