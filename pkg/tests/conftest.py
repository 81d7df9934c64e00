import numpy as np
import pytest

from venation.grid import make_grid, tensor_field
from venation.poisson import permeability_from_c


def random_spd_perm(n, r, rng):
    """Pointwise SPD permeability r I + G^T G from random 2x2 factors G."""
    g11, g12, g21, g22 = rng.standard_normal((4, n, n))
    c11 = g11 * g11 + g21 * g21
    c12 = g11 * g12 + g21 * g22
    c22 = g12 * g12 + g22 * g22
    grid = make_grid(n)
    return permeability_from_c(tensor_field(grid, c11, c12, c22), r)


def compatible_source(grid, rng):
    from venation.grid import ScalarField

    s = rng.standard_normal((grid.n, grid.n))
    s -= s.mean()
    return ScalarField(grid, s)


def dense_matrix(op):
    """Dense matrix of the assembled stencil, column by column."""
    n = op.grid.n
    N = n * n
    A = np.zeros((N, N))
    e = np.zeros(N)
    for k in range(N):
        e[:] = 0.0
        e[k] = 1.0
        A[:, k] = op.apply(e.reshape(n, n)).ravel()
    return A


def dense_pin_and_shift(op, source_values):
    """Direct dense solve with one pinned value, shifted to zero mean."""
    A = dense_matrix(op)
    b = source_values.ravel().copy()
    A[0, :] = 0.0
    A[0, 0] = 1.0
    b[0] = 0.0
    x = np.linalg.solve(A, b)
    x -= x.mean()
    return x.reshape(source_values.shape)


def zeroed_ring(values):
    out = np.asarray(values, dtype=float).copy()
    out[0, :] = out[-1, :] = 0.0
    out[:, 0] = out[:, -1] = 0.0
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
