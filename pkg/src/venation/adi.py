"""Symmetric-ADI semi-implicit time integrator for both conductivity systems.

Each step runs two alternating-direction branches (y-implicit first and
x-implicit first) and averages them, which preserves the axis symmetry of the
continuous problem.  Within a branch the first sweep treats one direction of
the (D^2-scaled) Laplacian implicitly with the cross/activation source taken
explicitly; the second sweep treats the other direction implicitly together
with the diagonal reaction terms (metabolic coefficient frozen at the old
state, and, for the vector model, the implicit diagonal activation).  The
pressure is frozen at the old time level for the whole step and recomputed
once from the averaged result.

Boundary conditions: under dirichlet_zero the homogeneous wall value is
imposed at the physical wall through ghost cells (ghost = -edge value), which
keeps the scheme second order near the boundary; every cell, the outermost
ring included, is an unknown.  Under steady_state_flux the outermost cells
are instead pinned to the steady-state trace recomputed from the old pressure
once per step (identity rows).

With D = 0 the sweeps contain no line solves and reduce to pointwise algebra
on the same formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .dynamics import (
    SystemParams,
    activation_terms,
    energy_tens,
    energy_vect,
    metabolic_coeff_c,
    metabolic_coeff_m,
)
from .errors import NumericsError, PivotError
from .grid import (
    GridSpec,
    ScalarField,
    SymTensorField2,
    VectorField2,
    dx,
    dy,
)
from .poisson import (
    PressureSolver,
    assemble,
    permeability_from_c,
    permeability_from_m,
)

PIVOT_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class MState:
    """Vector-model state: conductivity m and the pressure at the same time level.

    The pressure always has zero mean; the source rides along because every
    step re-solves the pressure problem against it.
    """

    t: float
    m: VectorField2
    p: ScalarField
    params: SystemParams
    source: ScalarField


@dataclass(frozen=True, eq=False)
class CState:
    """Tensor-model state: conductivity C and the pressure at the same time level."""

    t: float
    C: SymTensorField2
    p: ScalarField
    params: SystemParams
    source: ScalarField


def thomas_solve_batch(sub, diag, sup, rhs) -> np.ndarray:
    """Solve a batch of tridiagonal systems stacked along axis 0.

    Row k of each system reads sub[k] x[k-1] + diag[k] x[k] + sup[k] x[k+1]
    = rhs[k]; sub[:, 0] and sup[:, -1] are ignored.  Intended for systems with
    O(1) positive pivots (identity rows, I - lambda L rows); a pivot at or
    below PIVOT_FLOOR raises PivotError.
    """
    diag = np.asarray(diag, dtype=float)
    sub = np.asarray(sub, dtype=float)
    sup = np.asarray(sup, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    nlines, npts = diag.shape
    cp = np.empty_like(diag)
    xp = np.empty_like(diag)
    pivmin = float(diag[:, 0].min())
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cp[:, 0] = sup[:, 0] / diag[:, 0]
        xp[:, 0] = rhs[:, 0] / diag[:, 0]
        for k in range(1, npts):
            den = diag[:, k] - sub[:, k] * cp[:, k - 1]
            dmin = den.min()
            if not dmin > pivmin:
                pivmin = float(dmin)
            if k < npts - 1:
                cp[:, k] = sup[:, k] / den
            xp[:, k] = (rhs[:, k] - sub[:, k] * xp[:, k - 1]) / den
    if not pivmin > PIVOT_FLOOR:
        raise PivotError(
            f"tridiagonal pivot degenerated to {pivmin:.3e}; the implicit activation "
            "term destroyed the line system, reduce dt"
        )
    x = xp
    for k in range(npts - 2, -1, -1):
        x[:, k] -= cp[:, k] * x[:, k + 1]
    return x


def _check_pointwise_pivot(denom: np.ndarray) -> None:
    dmin = float(denom.min())
    if not dmin > PIVOT_FLOOR:
        raise PivotError(f"pointwise update coefficient degenerated to {dmin:.3e}; reduce dt")


def _lap_ghost(v: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Second difference with homogeneous Dirichlet walls via ghost = -edge value."""
    out = np.empty_like(v)
    if axis == 0:
        out[1:-1, :] = v[2:, :] - 2.0 * v[1:-1, :] + v[:-2, :]
        out[0, :] = v[1, :] - 3.0 * v[0, :]
        out[-1, :] = v[-2, :] - 3.0 * v[-1, :]
    else:
        out[:, 1:-1] = v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]
        out[:, 0] = v[:, 1] - 3.0 * v[:, 0]
        out[:, -1] = v[:, -2] - 3.0 * v[:, -1]
    return out / (h * h)


def _sweep_ghost(rhs, lam, extra_diag, axis, h):
    """Solve (I - lam d^2/d(axis)^2 + extra_diag) u = rhs with ghost Dirichlet walls.

    lam = 0 short-circuits to the pointwise division the degenerate-diffusion
    mode calls for.
    """
    if lam == 0.0:
        if extra_diag is None:
            return rhs.copy()
        denom = 1.0 + extra_diag
        _check_pointwise_pivot(denom)
        return rhs / denom

    transpose = axis == 0
    if transpose:
        rhs = rhs.T
        if extra_diag is not None:
            extra_diag = extra_diag.T
    w = lam / (h * h)
    diag = np.full(rhs.shape, 1.0 + 2.0 * w)
    diag[:, 0] = diag[:, -1] = 1.0 + 3.0 * w
    if extra_diag is not None:
        diag = diag + extra_diag
    sub = np.full(rhs.shape, -w)
    sup = np.full(rhs.shape, -w)
    out = thomas_solve_batch(sub, diag, sup, rhs)
    return out.T if transpose else out


def _lap_pinned(v: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Second difference on interior cells only; pinned boundary rows read zero."""
    out = np.zeros_like(v)
    if axis == 0:
        out[1:-1, :] = (v[2:, :] - 2.0 * v[1:-1, :] + v[:-2, :]) / (h * h)
    else:
        out[:, 1:-1] = (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) / (h * h)
    return out


def _sweep_pinned(rhs, lam, extra_diag, bvals, mask, axis, h):
    """Solve the implicit sweep with identity rows pinning boundary cells to bvals."""
    if lam == 0.0:
        denom = 1.0 if extra_diag is None else 1.0 + extra_diag
        if extra_diag is not None:
            _check_pointwise_pivot(np.where(mask, np.inf, denom))
        out = rhs / denom
        return np.where(mask, bvals, out)

    transpose = axis == 0
    if transpose:
        rhs = rhs.T
        mask = mask.T
        bvals = bvals.T
        if extra_diag is not None:
            extra_diag = extra_diag.T
    w = lam / (h * h)
    diag = np.full(rhs.shape, 1.0 + 2.0 * w)
    if extra_diag is not None:
        diag = diag + extra_diag
    sub = np.full(rhs.shape, -w)
    sup = np.full(rhs.shape, -w)
    diag = np.where(mask, 1.0, diag)
    sub = np.where(mask, 0.0, sub)
    sup = np.where(mask, 0.0, sup)
    b = np.where(mask, bvals, rhs)
    out = thomas_solve_batch(sub, diag, sup, b)
    return out.T if transpose else out


def boundary_values_m(p: ScalarField, params: SystemParams) -> VectorField2:
    """Steady-state boundary trace for m: beta grad p on the boundary cells.

    beta = (c^2/alpha |grad p|^(4-2 gamma))^(1/(2(gamma-1))), with one-sided
    pressure gradients; cells where the gradient vanishes get the value 0.
    Interior cells of the returned field are zero.
    """
    if params.gamma == 1.0:
        raise ValueError("steady-state boundary trace undefined for gamma = 1")
    if params.alpha <= 0.0 or params.c <= 0.0:
        raise ValueError("steady-state boundary trace needs alpha > 0 and c > 0")
    gx = dx(p, "one_sided").values
    gy = dy(p, "one_sided").values
    gnorm = np.hypot(gx, gy)
    beta = np.zeros_like(gnorm)
    sel = gnorm > 0.0
    expo = 1.0 / (2.0 * (params.gamma - 1.0))
    beta[sel] = (params.c**2 / params.alpha * gnorm[sel] ** (4.0 - 2.0 * params.gamma)) ** expo
    ring = p.grid.boundary_mask()
    g = p.grid
    return VectorField2(
        ScalarField(g, np.where(ring, beta * gx, 0.0)),
        ScalarField(g, np.where(ring, beta * gy, 0.0)),
    )


def boundary_values_c(p: ScalarField, params: SystemParams) -> SymTensorField2:
    """Steady-state boundary trace for C: beta~ (grad p x grad p) on boundary cells.

    beta~ = (c^2/alpha |grad p|^(-2(gamma-2)))^(1/(gamma-1)); degenerate
    gradients map to the zero tensor.
    """
    if params.gamma == 1.0:
        raise ValueError("steady-state boundary trace undefined for gamma = 1")
    if params.alpha <= 0.0 or params.c <= 0.0:
        raise ValueError("steady-state boundary trace needs alpha > 0 and c > 0")
    gx = dx(p, "one_sided").values
    gy = dy(p, "one_sided").values
    gnorm = np.hypot(gx, gy)
    beta = np.zeros_like(gnorm)
    sel = gnorm > 0.0
    expo = 1.0 / (params.gamma - 1.0)
    beta[sel] = (params.c**2 / params.alpha * gnorm[sel] ** (-2.0 * (params.gamma - 2.0))) ** expo
    ring = p.grid.boundary_mask()
    g = p.grid
    return SymTensorField2(
        ScalarField(g, np.where(ring, beta * gx * gx, 0.0)),
        ScalarField(g, np.where(ring, beta * gx * gy, 0.0)),
        ScalarField(g, np.where(ring, beta * gy * gy, 0.0)),
    )


def _apply_ring(values: np.ndarray, ring_values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, ring_values, values)


def _branch_components(
    comps_n: Sequence[np.ndarray],
    sweep1_sources: Sequence[np.ndarray],
    sweep2_extra: Sequence[np.ndarray | None],
    bvals: Sequence[np.ndarray],
    first_axis: int,
    lam: float,
    mask: np.ndarray,
    h: float,
) -> list[np.ndarray]:
    """One ADI branch for a list of scalar components sharing the sweep pattern.

    first_axis is implicit in sweep 1; the other axis is implicit in sweep 2.
    sweep1_sources are the explicit per-component source terms (already scaled
    by dt); sweep2_extra are the per-component implicit diagonal additions.
    """
    second_axis = 1 - first_axis
    out = []
    for comp, src, extra, bv in zip(comps_n, sweep1_sources, sweep2_extra, bvals):
        rhs1 = comp + lam * _second_diff(comp, second_axis, h) + src
        tilde = _sweep(rhs1, lam, None, bv, mask, first_axis, h)
        rhs2 = tilde + lam * _second_diff(tilde, first_axis, h)
        out.append(_sweep(rhs2, lam, extra, bv, mask, second_axis, h))
    return out


def adi_step_m(state: MState, solver: PressureSolver | None = None) -> MState:
    """Advance the vector model one step of dt and refresh the pressure.

    A shared PressureSolver carries the pressure preconditioner across steps;
    without one the step builds a throwaway solver.
    """
    params = state.params
    g = state.m.grid
    h = g.h
    dt = params.dt
    lam = params.D**2 * dt / 2.0
    mask = g.boundary_mask()

    act = activation_terms(state.p, params.grad_mode)
    q = metabolic_coeff_m(state.m, params.gamma).values
    m1 = state.m.c1.values
    m2 = state.m.c2.values

    if params.bc_mode == "steady_state_flux":
        bv = boundary_values_m(state.p, params)
        b1, b2 = bv.c1.values, bv.c2.values
    else:
        b1 = b2 = np.zeros_like(m1)

    c2 = params.c**2
    cross = dt * c2 * act.pxy.values
    sources = (cross * m2, cross * m1)
    extras = (
        dt * params.alpha * q - dt * c2 * act.px2.values,
        dt * params.alpha * q - dt * c2 * act.py2.values,
    )
    comps = (m1, m2)
    bvals = (b1, b2)

    y_first = _branch_components(comps, sources, extras, bvals, 1, lam, mask, h)
    x_first = _branch_components(comps, sources, extras, bvals, 0, lam, mask, h)
    new1 = 0.5 * (y_first[0] + x_first[0])
    new2 = 0.5 * (y_first[1] + x_first[1])
    new1 = _apply_ring(new1, b1, mask)
    new2 = _apply_ring(new2, b2, mask)

    m_new = VectorField2(ScalarField(g, new1), ScalarField(g, new2))
    op = assemble(permeability_from_m(m_new, params.r))
    solver = solver if solver is not None else PressureSolver()
    p_new = solver.solve(op, state.source, tol=params.poisson_tol, x0=state.p)
    return MState(state.t + dt, m_new, p_new, params, state.source)


def adi_step_c(state: CState, solver: PressureSolver | None = None) -> CState:
    """Advance the tensor model one step of dt and refresh the pressure."""
    params = state.params
    g = state.C.grid
    h = g.h
    dt = params.dt
    lam = params.D**2 * dt / 2.0
    mask = g.boundary_mask()

    act = activation_terms(state.p, params.grad_mode)
    q = metabolic_coeff_c(state.C, params.gamma, params.epsilon).values

    if params.bc_mode == "steady_state_flux":
        bv = boundary_values_c(state.p, params)
        bvals = (bv.c11.values, bv.c12.values, bv.c22.values)
    else:
        z = np.zeros((g.n, g.n))
        bvals = (z, z, z)

    c2dt = params.c**2 * dt
    sources = (c2dt * act.px2.values, c2dt * act.pxy.values, c2dt * act.py2.values)
    extra = dt * params.alpha * q
    extras = (extra, extra, extra)
    comps = (state.C.c11.values, state.C.c12.values, state.C.c22.values)

    y_first = _branch_components(comps, sources, extras, bvals, 1, lam, mask, h)
    x_first = _branch_components(comps, sources, extras, bvals, 0, lam, mask, h)
    new = [
        _apply_ring(0.5 * (yf + xf), bv, mask)
        for yf, xf, bv in zip(y_first, x_first, bvals)
    ]

    C_new = SymTensorField2(
        ScalarField(g, new[0]), ScalarField(g, new[1]), ScalarField(g, new[2])
    )
    op = assemble(permeability_from_c(C_new, params.r))
    solver = solver if solver is not None else PressureSolver()
    p_new = solver.solve(op, state.source, tol=params.poisson_tol, x0=state.p)
    return CState(state.t + dt, C_new, p_new, params, state.source)


def init_m_state(
    m0: VectorField2,
    source: ScalarField,
    params: SystemParams,
    solver: PressureSolver | None = None,
) -> MState:
    """Solve the initial pressure problem and assemble the starting state."""
    op = assemble(permeability_from_m(m0, params.r))
    solver = solver if solver is not None else PressureSolver()
    p0 = solver.solve(op, source, tol=params.poisson_tol)
    return MState(0.0, m0, p0, params, source)


def init_c_state(
    C0: SymTensorField2,
    source: ScalarField,
    params: SystemParams,
    solver: PressureSolver | None = None,
) -> CState:
    op = assemble(permeability_from_c(C0, params.r))
    solver = solver if solver is not None else PressureSolver()
    p0 = solver.solve(op, source, tol=params.poisson_tol)
    return CState(0.0, C0, p0, params, source)


@dataclass
class RunRecord:
    """Per-step time and energy series plus the final state of a run."""

    system: str
    times: np.ndarray
    energies: np.ndarray
    state: MState | CState


def run_simulation(
    system: str,
    params: SystemParams,
    ic: VectorField2 | SymTensorField2,
    source: ScalarField,
    observers: Iterable[tuple[float, Callable]] = (),
    steady_stop: float | None = None,
) -> RunRecord:
    """Drive one system from t = 0 to t_fin, recording the energy every step.

    observers is a list of (cadence, callback) pairs; each callback receives
    the current state at t = 0 and whenever t crosses a multiple of its
    cadence (cadence 0 fires every step).  steady_stop, when set, stops early
    once the relative energy change per unit time drops below it.
    """
    solver = PressureSolver()
    if system == "m":
        if not isinstance(ic, VectorField2):
            raise ValueError("vector-model run needs a VectorField2 initial condition")
        state = init_m_state(ic, source, params, solver)
        step = adi_step_m
        energy = lambda s: energy_vect(s.m, s.p, s.params)
    elif system == "C":
        if not isinstance(ic, SymTensorField2):
            raise ValueError("tensor-model run needs a SymTensorField2 initial condition")
        state = init_c_state(ic, source, params, solver)
        step = adi_step_c
        energy = lambda s: energy_tens(s.C, s.p, s.params)
    else:
        raise ValueError(f"unknown system {system!r}; expected 'm' or 'C'")

    obs = [(float(cad), cb) for cad, cb in observers]
    for _, cb in obs:
        cb(state)
    next_due = [cad if cad > 0 else 0.0 for cad, _ in obs]

    times = [0.0]
    energies = [energy(state)]
    dt = params.dt
    k = 0
    while state.t < params.t_fin - 1e-9 * dt:
        try:
            state = step(state, solver)
        except NumericsError as exc:
            raise type(exc)(f"step failed at t = {(k + 1) * dt:g}: {exc}") from exc
        k += 1
        times.append(state.t)
        e = energy(state)
        energies.append(e)
        for idx, (cad, cb) in enumerate(obs):
            if cad <= 0.0:
                cb(state)
            elif state.t + 1e-9 * dt >= next_due[idx]:
                cb(state)
                while next_due[idx] <= state.t + 1e-9 * dt:
                    next_due[idx] += cad
        if steady_stop is not None and len(energies) >= 2:
            prev, cur = energies[-2], energies[-1]
            rate = abs(cur - prev) / (dt * max(abs(cur), 1e-300))
            if rate < steady_stop:
                break
    return RunRecord(system, np.asarray(times), np.asarray(energies), state)
