"""Conservative variable-coefficient Neumann Poisson problem for the pressure.

The operator discretizes -div(P grad p) in flux form on the cell-centered
grid: face permeabilities are arithmetic averages of the two adjacent cells,
diagonal (xx/yy) fluxes use divided differences, and the off-diagonal fluxes
carry the transverse derivative averaged over the face's two cells.  Every
face on the domain boundary contributes zero flux, which is the discrete form
of the zero total-flux condition P grad p . nu = 0 and makes the scheme
globally conservative (constants are in the kernel, column sums vanish).

The resulting 9-point matrix is singular with kernel = constants; the solvers
below work in the zero-mean subspace, projecting the iterate back after every
update.  The stencil is symmetric only for special coefficient patterns (for
instance a vanishing off-diagonal entry), so assembly probes symmetry
numerically and the solve dispatches to Jacobi-preconditioned CG or to
BiCGStab.  Small background permeability makes the anisotropy ratio of
P = r I + m x m huge (rank-one plus r), which defeats pointwise
preconditioning, so the BiCGStab branch is preconditioned with a sparse LU
factorization of the pinned stencil; `PressureSolver` keeps that
factorization between calls and refreshes it only when it goes stale.
Convergence is always verified against the matrix-free stencil residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sparse_linalg

from .errors import EllipticityError, SolverConvergenceError
from .grid import GridSpec, ScalarField, SymTensorField2, VectorField2

# stencil keys -> (di, dj) neighbor offsets
OFFSETS = {
    "c": (0, 0),
    "e": (1, 0),
    "w": (-1, 0),
    "n": (0, 1),
    "s": (0, -1),
    "ne": (1, 1),
    "nw": (-1, 1),
    "se": (1, -1),
    "sw": (-1, -1),
}


@dataclass(frozen=True, eq=False)
class PermeabilityField:
    """Pointwise entries of the total permeability P = r I + C (or r I + m x m)."""

    p11: ScalarField
    p12: ScalarField
    p22: ScalarField
    r: float

    def __post_init__(self):
        if not (self.p11.grid == self.p12.grid == self.p22.grid):
            raise ValueError("permeability components must share one grid")

    @property
    def grid(self) -> GridSpec:
        return self.p11.grid


def permeability_from_m(m: VectorField2, r: float) -> PermeabilityField:
    """P = r I + m (x) m."""
    if r <= 0.0:
        raise ValueError(f"background permeability must be positive, got r={r}")
    m1, m2 = m.c1.values, m.c2.values
    g = m.grid
    return PermeabilityField(
        ScalarField(g, r + m1 * m1),
        ScalarField(g, m1 * m2),
        ScalarField(g, r + m2 * m2),
        float(r),
    )


def permeability_from_c(C: SymTensorField2, r: float) -> PermeabilityField:
    """P = r I + C."""
    if r <= 0.0:
        raise ValueError(f"background permeability must be positive, got r={r}")
    g = C.grid
    return PermeabilityField(
        ScalarField(g, r + C.c11.values),
        ScalarField(g, C.c12.values.copy()),
        ScalarField(g, r + C.c22.values),
        float(r),
    )


@dataclass(eq=False)
class PoissonOperator:
    """Assembled 9-point stencil with zero-flux boundary closure."""

    grid: GridSpec
    stencil: dict[str, np.ndarray]
    symmetric: bool = field(default=False)

    def apply(self, p: np.ndarray) -> np.ndarray:
        """Apply the operator to raw (n, n) values."""
        n = self.grid.n
        out = np.zeros_like(p)
        for key, (di, dj) in OFFSETS.items():
            coef = self.stencil[key]
            it = slice(max(0, -di), n - max(0, di))
            jt = slice(max(0, -dj), n - max(0, dj))
            isrc = slice(max(0, di), n - max(0, -di))
            jsrc = slice(max(0, dj), n - max(0, -dj))
            out[it, jt] += coef[it, jt] * p[isrc, jsrc]
        return out

    def apply_field(self, p: ScalarField) -> ScalarField:
        if p.grid != self.grid:
            raise ValueError("field grid does not match operator grid")
        return ScalarField(self.grid, self.apply(p.values))

    def row_sums(self) -> np.ndarray:
        """Per-cell sum of the nine stencil coefficients (equals A applied to ones)."""
        return sum(self.stencil[k] for k in OFFSETS)

    def diagonal(self) -> np.ndarray:
        return self.stencil["c"]

    def to_csr(self) -> sparse.csr_matrix:
        """Assemble the stencil into a scipy CSR matrix (row-major cell order)."""
        n = self.grid.n
        idx = np.arange(n * n).reshape(n, n)
        rows, cols, vals = [], [], []
        for key, (di, dj) in OFFSETS.items():
            coef = self.stencil[key]
            it = slice(max(0, -di), n - max(0, di))
            jt = slice(max(0, -dj), n - max(0, dj))
            isrc = slice(max(0, di), n - max(0, -di))
            jsrc = slice(max(0, dj), n - max(0, -dj))
            rows.append(idx[it, jt].ravel())
            cols.append(idx[isrc, jsrc].ravel())
            vals.append(coef[it, jt].ravel())
        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n * n, n * n),
        )


def _probe_symmetry(op: PoissonOperator, trials: int = 3, rtol: float = 1e-12) -> bool:
    rng = np.random.default_rng(20240817)
    n = op.grid.n
    for _ in range(trials):
        x = rng.standard_normal((n, n))
        y = rng.standard_normal((n, n))
        ax = op.apply(x)
        ay = op.apply(y)
        lhs = float(np.vdot(ax, y))
        rhs = float(np.vdot(x, ay))
        scale = np.linalg.norm(ax) * np.linalg.norm(y) + np.linalg.norm(x) * np.linalg.norm(ay)
        if abs(lhs - rhs) > rtol * max(scale, 1e-300):
            return False
    return True


def assemble(perm: PermeabilityField) -> PoissonOperator:
    """Build the conservative stencil of -div(P grad p) from pointwise P.

    Diagonal fluxes through the face between cells i and i+1 use the average
    permeability (P_{i+1} + P_i)/2 times the divided difference of p; the
    off-diagonal fluxes use the same face average of P12 times the transverse
    central derivative averaged over the two face cells (the 1/(8 h^2)
    corner-coupled form).  Off-diagonal fluxes whose transverse stencil would
    leave the domain (faces in the wall-adjacent transverse rows) are dropped,
    together with every flux through a wall face.
    """
    a = perm.p11.values
    b = perm.p12.values
    d = perm.p22.values
    if np.any(a <= 0.0) or np.any(d <= 0.0):
        raise EllipticityError("diagonal permeability entries must stay positive")

    g = perm.grid
    n = g.n
    h2 = g.h * g.h
    st = {k: np.zeros((n, n)) for k in OFFSETS}

    # xx fluxes through interior x-faces (i+1/2, j)
    wf = (a[1:, :] + a[:-1, :]) / (2.0 * h2)
    st["e"][:-1, :] -= wf
    st["c"][:-1, :] += wf
    st["w"][1:, :] -= wf
    st["c"][1:, :] += wf

    # yy fluxes through interior y-faces (i, j+1/2)
    vf = (d[:, 1:] + d[:, :-1]) / (2.0 * h2)
    st["n"][:, :-1] -= vf
    st["c"][:, :-1] += vf
    st["s"][:, 1:] -= vf
    st["c"][:, 1:] += vf

    if n >= 3:
        # off-diagonal flux P12 dp/dy through x-faces, away from the y walls
        wm = (b[1:, 1:-1] + b[:-1, 1:-1]) / (8.0 * h2)
        st["ne"][:-1, 1:-1] -= wm
        st["n"][:-1, 1:-1] -= wm
        st["se"][:-1, 1:-1] += wm
        st["s"][:-1, 1:-1] += wm
        st["n"][1:, 1:-1] += wm
        st["nw"][1:, 1:-1] += wm
        st["s"][1:, 1:-1] -= wm
        st["sw"][1:, 1:-1] -= wm

        # off-diagonal flux P12 dp/dx through y-faces, away from the x walls
        vm = (b[1:-1, 1:] + b[1:-1, :-1]) / (8.0 * h2)
        st["ne"][1:-1, :-1] -= vm
        st["e"][1:-1, :-1] -= vm
        st["nw"][1:-1, :-1] += vm
        st["w"][1:-1, :-1] += vm
        st["e"][1:-1, 1:] += vm
        st["se"][1:-1, 1:] += vm
        st["w"][1:-1, 1:] -= vm
        st["sw"][1:-1, 1:] -= vm

    op = PoissonOperator(g, st)
    op.symmetric = _probe_symmetry(op)
    return op


def make_source(grid: GridSpec, sigma: float, x0: tuple[float, float] = (0.1, 0.1)) -> ScalarField:
    """Gaussian bump exp(-sigma |x - x0|^2) minus its discrete mean."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    X, Y = grid.meshgrid()
    e = np.exp(-sigma * ((X - x0[0]) ** 2 + (Y - x0[1]) ** 2))
    return ScalarField(grid, e - e.mean())


def _project(v: np.ndarray) -> np.ndarray:
    v -= v.mean()
    return v


def _solve_cg(apply_op, b, x0, precond, tol_abs, maxiter):
    """Preconditioned CG on the zero-mean subspace; returns (x, iterations)."""
    x = _project(x0.copy())
    r = b - apply_op(x)
    z = precond(r)
    p = z.copy()
    rz = float(np.vdot(r, z))
    for it in range(maxiter):
        if np.linalg.norm(r) <= tol_abs:
            # recursion drift check against the true residual
            r_true = b - apply_op(x)
            if np.linalg.norm(r_true) <= tol_abs:
                return x, it
            r = r_true
            z = precond(r)
            p = z.copy()
            rz = float(np.vdot(r, z))
        ap = apply_op(p)
        pap = float(np.vdot(p, ap))
        if pap <= 0.0:
            break
        alpha = rz / pap
        x += alpha * p
        _project(x)
        r -= alpha * ap
        z = precond(r)
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.linalg.norm(b - apply_op(x)))
    if res <= tol_abs:
        return x, maxiter
    raise SolverConvergenceError(
        f"CG pressure solve stalled: residual {res:.3e} > target {tol_abs:.3e} after {maxiter} iterations"
    )


def _solve_bicgstab(apply_op, b, x0, precond, tol_abs, maxiter):
    """Preconditioned BiCGStab on the zero-mean subspace; returns (x, iterations)."""
    x = _project(x0.copy())
    r = b - apply_op(x)
    r_shadow = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    for it in range(maxiter):
        if np.linalg.norm(r) <= tol_abs:
            r_true = b - apply_op(x)
            if np.linalg.norm(r_true) <= tol_abs:
                return x, it
            # restart on recursion drift
            r = r_true
            r_shadow = r.copy()
            rho = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
        rho_new = float(np.vdot(r_shadow, r))
        if rho_new == 0.0 or omega == 0.0:
            # breakdown: restart from the current iterate
            r = b - apply_op(x)
            r_shadow = r.copy()
            rho = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            rho_new = float(np.vdot(r_shadow, r))
            if rho_new == 0.0:
                break
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = precond(p)
        v = apply_op(p_hat)
        denom = float(np.vdot(r_shadow, v))
        if denom == 0.0:
            break
        alpha = rho_new / denom
        s = r - alpha * v
        if np.linalg.norm(s) <= tol_abs:
            x += alpha * p_hat
            _project(x)
            r = b - apply_op(x)
            if np.linalg.norm(r) <= tol_abs:
                return x, it
            r_shadow = r.copy()
            rho = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            continue
        s_hat = precond(s)
        t = apply_op(s_hat)
        tt = float(np.vdot(t, t))
        if tt == 0.0:
            break
        omega = float(np.vdot(t, s)) / tt
        x += alpha * p_hat + omega * s_hat
        _project(x)
        r = s - omega * t
        rho = rho_new
    res = float(np.linalg.norm(b - apply_op(x)))
    if res <= tol_abs:
        return x, maxiter
    raise SolverConvergenceError(
        f"BiCGStab pressure solve stalled: residual {res:.3e} > target {tol_abs:.3e} after {maxiter} iterations"
    )


class LuPreconditioner:
    """Sparse LU of the pinned stencil, applied with zero-mean projection.

    Pinning one row removes the constant kernel so the factorization exists;
    it only serves as a preconditioner, so the perturbation is harmless.
    """

    def __init__(self, op: PoissonOperator):
        mat = op.to_csr().tolil()
        mat[0, :] = 0.0
        mat[0, 0] = 1.0
        self._lu = sparse_linalg.splu(mat.tocsc())
        self._shape = (op.grid.n, op.grid.n)

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self._lu.solve(v.ravel()).reshape(self._shape)
        return _project(out)


class PressureSolver:
    """Pressure solve with a lagged LU preconditioner kept between calls.

    Symmetric stencils go through Jacobi CG.  Nonsymmetric ones go through
    BiCGStab preconditioned with a sparse LU that is reused across calls and
    refreshed once it goes stale (slow or failed convergence).  All paths
    verify the true stencil residual and return the zero-mean pressure.
    """

    def __init__(self, refresh_iters: int = 10, stale_cap: int = 60):
        self.refresh_iters = refresh_iters
        self.stale_cap = stale_cap
        self._lu: LuPreconditioner | None = None
        self._refresh = False

    def solve(
        self,
        op: PoissonOperator,
        source: ScalarField,
        tol: float = 1e-10,
        x0: ScalarField | None = None,
    ) -> ScalarField:
        if source.grid != op.grid:
            raise ValueError("source grid does not match operator grid")
        if tol <= 0.0:
            raise ValueError(f"tolerance must be positive, got {tol}")
        b = source.values
        scale = float(np.max(np.abs(b)))
        if scale == 0.0:
            return ScalarField(op.grid, np.zeros_like(b))
        if abs(float(b.mean())) > 1e-12 * scale:
            raise ValueError("incompatible source: discrete mean is not zero")
        b = b - b.mean()

        maxiter = 50 * op.grid.n
        tol_abs = tol * float(np.linalg.norm(b))
        start = np.zeros_like(b) if x0 is None else x0.values.copy()

        if op.symmetric:
            inv_diag = 1.0 / op.diagonal()
            jacobi = lambda r: _project(inv_diag * r)
            try:
                x, _ = _solve_cg(op.apply, b, start, jacobi, tol_abs, maxiter)
                return ScalarField(op.grid, _project(x))
            except SolverConvergenceError:
                pass  # fall through to the LU-preconditioned path

        fresh = self._lu is None or self._refresh
        if fresh:
            self._lu = LuPreconditioner(op)
            self._refresh = False
        cap = maxiter if fresh else min(self.stale_cap, maxiter)
        try:
            x, iters = _solve_bicgstab(op.apply, b, start, self._lu.apply, tol_abs, cap)
        except SolverConvergenceError:
            if fresh:
                raise
            # stale preconditioner: refactor from the current operator and retry
            self._lu = LuPreconditioner(op)
            self._refresh = False
            x, iters = _solve_bicgstab(op.apply, b, start, self._lu.apply, tol_abs, maxiter)
        if iters > self.refresh_iters:
            self._refresh = True
        return ScalarField(op.grid, _project(x))


def solve_pressure(
    op: PoissonOperator,
    source: ScalarField,
    tol: float = 1e-10,
    x0: ScalarField | None = None,
) -> ScalarField:
    """Solve op p = source for the zero-mean pressure.

    The source must be compatible (zero mean); the returned pressure satisfies
    ||op p - source|| <= tol ||source|| and has zero discrete mean.  An
    optional x0 warm-starts the iteration.  For repeated solves against
    slowly varying operators use a shared PressureSolver, which keeps its
    preconditioner between calls.
    """
    return PressureSolver().solve(op, source, tol=tol, x0=x0)
