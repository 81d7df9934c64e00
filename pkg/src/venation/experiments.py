"""Named test catalog, initial conditions, comparison metrics, and accuracy harness.

The catalog reproduces the published parameter sets: TestA-TestC drive the
accuracy studies, TestD-TestL the parameter sweeps (diffusivity, metabolic
exponent, regularization), TestM the matched vector/tensor comparison, and
TestN/TestO the zero and near-zero diffusivity runs.  TestD-g175 is the
derived uniqueness study (TestD parameters with gamma = 1.75).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .adi import adi_step_c, adi_step_m, init_c_state, init_m_state, run_simulation
from .dynamics import SystemParams, frobenius_norm_field
from .grid import (
    GridSpec,
    ScalarField,
    SymTensorField2,
    VectorField2,
    field_from_function,
    make_grid,
    rel_l2_error,
    restrict,
    tensor_field,
    vector_field,
)
from .poisson import PressureSolver, make_source

SOURCE_SIGMA = 1000.0
SOURCE_CENTER = (0.1, 0.1)

# comparison checkpoints 0.01 * 2^k, k = 0..6
CHECKPOINT_TIMES = tuple(0.01 * 2**k for k in range(7))


@dataclass(frozen=True)
class TestCase:
    """One catalog entry; params hold the vector-model (or only) parameter set."""

    name: str
    system: str  # "m", "C", or "both"
    params: SystemParams
    ic: str  # "default" or "prepared"
    n: int
    params_c: SystemParams | None = None  # matched tensor-model set for paired tests

    @property
    def t_fin(self) -> float:
        return self.params.t_fin


def matched_params(m_params: SystemParams, m0_norm: float) -> SystemParams:
    """Tensor-model parameter set matched to a vector-model one.

    Keeps D, doubles alpha, shifts gamma by one, and scales the activation
    constant by sqrt(2) |m0|; every other field is copied.
    """
    if m0_norm <= 0.0:
        raise ValueError(f"matched parameters need |m0| > 0, got {m0_norm}")
    return replace(
        m_params,
        alpha=2.0 * m_params.alpha,
        gamma=m_params.gamma + 1.0,
        c=math.sqrt(2.0) * m_params.c * m0_norm,
    )


def _catalog() -> list[TestCase]:
    def case(name, system, ic="default", n=600, params_c=None, **kw):
        return TestCase(name, system, SystemParams(**kw), ic, n, params_c)

    deep = dict(alpha=0.75, c=5.0, D=0.01, epsilon=1e-3, gamma=0.75, r=0.005, t_fin=15.0, dt=1.0 / 600)
    testm_m = SystemParams(
        alpha=0.5, c=1.0, D=0.1, epsilon=0.1, gamma=0.75, r=0.1, t_fin=0.64, dt=1.0 / 600
    )
    cases = [
        case("TestA", "m", alpha=0.5, c=1.0, D=0.01, gamma=0.75, r=0.1, t_fin=1.0, dt=1.0 / 600),
        case("TestB", "C", alpha=1.0, c=1.0, D=0.01, epsilon=0.1, gamma=1.75, r=0.1, t_fin=1.0, dt=1.0 / 600),
        case("TestC", "m", alpha=0.5, c=5.0, D=0.01, gamma=0.75, r=0.01, t_fin=1.0, dt=1.0 / 600),
        case("TestD", "both", **deep),
        case("TestE", "both", **{**deep, "D": 0.001}),
        case("TestF", "both", **{**deep, "gamma": 0.5}),
        case("TestG", "both", **{**deep, "D": 0.05}),
        case("TestH", "both", **{**deep, "gamma": 1.0}),
        case("TestI", "C", **{**deep, "epsilon": 1e-2}),
        case("TestL", "C", **{**deep, "epsilon": 1e-4}),
        TestCase("TestM", "both", testm_m, "prepared", 600, matched_params(testm_m, 1.0)),
        case("TestN", "C", **{**deep, "D": 0.0}),
        case("TestO", "C", **{**deep, "D": 1e-5}),
        case("TestD-g175", "m", **{**deep, "gamma": 1.75}),
    ]
    return cases


_CATALOG = {t.name: t for t in _catalog()}


def test_catalog() -> list[TestCase]:
    """All catalog entries in table order."""
    return list(_CATALOG.values())


def lookup(name: str) -> TestCase:
    try:
        return _CATALOG[name]
    except KeyError:
        known = ", ".join(_CATALOG)
        raise KeyError(f"unknown test {name!r}; known tests: {known}") from None


def _ridge(X, Y):
    return (2.0 - np.abs(X + Y)) * np.exp(-10.0 * np.abs(X - Y))


_VECTOR_RECIPES = {
    "default_m": lambda g: (np.ones((g.n, g.n)), np.ones((g.n, g.n))),
    "prepared_m": lambda g: (
        np.full((g.n, g.n), math.sqrt(2.0) / 2.0),
        np.full((g.n, g.n), math.sqrt(2.0) / 2.0),
    ),
    "m01": lambda g: (np.ones((g.n, g.n)), np.full((g.n, g.n), math.sqrt(2.0))),
    "m02": lambda g: (np.full((g.n, g.n), 5.0), np.full((g.n, g.n), 5.0)),
    "m03": lambda g: (
        field_from_function(g, _ridge).values,
        field_from_function(g, _ridge).values,
    ),
}

# the outer product of the prepared vector data, so the well-prepared identity
# C0 = m0 x m0 holds exactly in floating point (one ulp from 0.5)
_PREPARED_HALF = (math.sqrt(2.0) / 2.0) ** 2

_TENSOR_RECIPES = {
    "default_c": lambda g: (np.ones((g.n, g.n)), np.zeros((g.n, g.n)), np.ones((g.n, g.n))),
    "prepared_c": lambda g: (
        np.full((g.n, g.n), _PREPARED_HALF),
        np.full((g.n, g.n), _PREPARED_HALF),
        np.full((g.n, g.n), _PREPARED_HALF),
    ),
    "ridge_c": lambda g: (
        field_from_function(g, _ridge).values,
        np.zeros((g.n, g.n)),
        field_from_function(g, _ridge).values,
    ),
}


def initial_condition(
    recipe: str, grid: GridSpec, bc_mode: str = "dirichlet_zero"
) -> VectorField2 | SymTensorField2:
    """Build a named initial condition on the grid.

    Under dirichlet_zero boundary cells are zeroed so the data respect the
    homogeneous boundary condition from the first step on.
    """
    if recipe in _VECTOR_RECIPES:
        comps = [c.copy() for c in _VECTOR_RECIPES[recipe](grid)]
        build = vector_field
    elif recipe in _TENSOR_RECIPES:
        comps = [c.copy() for c in _TENSOR_RECIPES[recipe](grid)]
        build = tensor_field
    else:
        known = sorted(_VECTOR_RECIPES) + sorted(_TENSOR_RECIPES)
        raise KeyError(f"unknown initial condition {recipe!r}; known recipes: {', '.join(known)}")
    if bc_mode == "dirichlet_zero":
        ring = grid.boundary_mask()
        for c in comps:
            c[ring] = 0.0
    return build(grid, *comps)


def ic_recipe(test: TestCase, system: str) -> str:
    """Concrete recipe name for the test's abstract IC and the chosen system."""
    suffix = "m" if system == "m" else "c"
    return f"{test.ic}_{suffix}"


def params_for(test: TestCase, system: str, n: int, dt: float | None = None, **overrides) -> SystemParams:
    """Catalog parameters specialized to a system, resolution, and time step.

    dt defaults to h = 1/n so spatial and temporal refinement stay tied.
    """
    base = test.params_c if (system == "C" and test.params_c is not None) else test.params
    return replace(base, dt=dt if dt is not None else 1.0 / n, **overrides)


def default_source(grid: GridSpec) -> ScalarField:
    return make_source(grid, SOURCE_SIGMA, SOURCE_CENTER)


def run_test(test: TestCase, system: str, n: int | None = None, dt: float | None = None,
             observers=(), **overrides):
    """Run one catalog test for one system; returns the adi RunRecord."""
    n = n if n is not None else test.n
    grid = make_grid(n)
    params = params_for(test, system, n, dt, **overrides)
    ic = initial_condition(ic_recipe(test, system), grid, params.bc_mode)
    source = default_source(grid)
    return run_simulation(system, params, ic, source, observers=observers)


def magnitude_field(state) -> ScalarField:
    """|m| for vector states, |C|_F for tensor states."""
    if hasattr(state, "m"):
        return ScalarField(state.m.grid, np.hypot(state.m.c1.values, state.m.c2.values))
    return frobenius_norm_field(state.C)


def discrepancy_norm(C: SymTensorField2, m: VectorField2) -> float:
    """Relative grid-L2 distance between |C|_F and |m x m|_F."""
    if C.grid != m.grid:
        raise ValueError("fields live on different grids")
    m1, m2 = m.c1.values, m.c2.values
    mm = np.sqrt((m1 * m1) ** 2 + 2.0 * (m1 * m2) ** 2 + (m2 * m2) ** 2)
    fro = frobenius_norm_field(C).values
    denom = np.linalg.norm(mm)
    if denom == 0.0:
        raise ValueError("discrepancy norm undefined: |m x m| vanishes")
    return float(np.linalg.norm(fro - mm) / denom)


def diff_metric(a: VectorField2, b: VectorField2) -> float:
    """Relative Frobenius distance over all components and cells, ||a - b|| / ||b||."""
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    num = np.sqrt(
        np.sum((a.c1.values - b.c1.values) ** 2 + (a.c2.values - b.c2.values) ** 2)
    )
    den = np.sqrt(np.sum(b.c1.values**2 + b.c2.values**2))
    if den == 0.0:
        raise ValueError("difference metric undefined: ||b|| vanishes")
    return float(num / den)


@dataclass(frozen=True)
class AccuracyRow:
    """One refinement level: n, error against the next-coarser run, observed order."""

    n: int
    error: float
    order: float | None


def pair_error(coarse_mag: ScalarField, fine_mag: ScalarField) -> float:
    """Relative L2 error between a run and the restriction of its refinement."""
    return rel_l2_error(coarse_mag, restrict(fine_mag))


def richardson_study(test: TestCase, n_list, system: str | None = None) -> list[AccuracyRow]:
    """Successive-refinement accuracy rows for a catalog test.

    Runs the test at every resolution with dt = h; row n compares the n/2 run
    with the restricted n run, and the order is the log2 ratio of consecutive
    errors (so the first comparable row has no order).
    """
    n_list = [int(n) for n in n_list]
    if any(n2 != 2 * n1 for n1, n2 in zip(n_list, n_list[1:])):
        raise ValueError(f"resolutions must double at each level, got {n_list}")
    if system is None:
        system = test.system
    if system not in ("m", "C"):
        raise ValueError("richardson_study needs a single system ('m' or 'C')")

    mags = [magnitude_field(run_test(test, system, n=n).state) for n in n_list]
    rows: list[AccuracyRow] = []
    prev_err = None
    for k in range(1, len(n_list)):
        err = pair_error(mags[k - 1], mags[k])
        order = None if prev_err is None else math.log2(prev_err / err)
        rows.append(AccuracyRow(n_list[k], err, order))
        prev_err = err
    return rows


@dataclass
class PairedRecord:
    """Lockstep vector/tensor comparison: per-step times and discrepancy values."""

    times: np.ndarray
    discrepancy: np.ndarray
    m_state: object
    c_state: object

    def at_checkpoints(self, checkpoints=CHECKPOINT_TIMES) -> list[tuple[float, float]]:
        """(time, value) pairs at the requested times, linearly interpolated
        between the two bracketing steps; checkpoints beyond the run are dropped."""
        out = []
        t_end = float(self.times[-1])
        for t in checkpoints:
            if t <= t_end + 1e-12:
                out.append((t, float(np.interp(t, self.times, self.discrepancy))))
        return out


def paired_run(test: TestCase, n: int | None = None, dt: float | None = None) -> PairedRecord:
    """Advance both systems side by side from well-prepared data on one clock."""
    n = n if n is not None else test.n
    grid = make_grid(n)
    m_params = params_for(test, "m", n, dt)
    m0 = initial_condition(ic_recipe(test, "m"), grid, m_params.bc_mode)
    m0_norm = float(np.hypot(m0.c1.values, m0.c2.values).max())
    c_params = matched_params(m_params, m0_norm)
    C0 = initial_condition(ic_recipe(test, "C"), grid, c_params.bc_mode)
    source = default_source(grid)

    solver_m, solver_c = PressureSolver(), PressureSolver()
    ms = init_m_state(m0, source, m_params, solver_m)
    cs = init_c_state(C0, source, c_params, solver_c)
    times = [0.0]
    values = [discrepancy_norm(cs.C, ms.m)]
    while ms.t < m_params.t_fin - 1e-9 * m_params.dt:
        ms = adi_step_m(ms, solver_m)
        cs = adi_step_c(cs, solver_c)
        times.append(ms.t)
        values.append(discrepancy_norm(cs.C, ms.m))
    return PairedRecord(np.asarray(times), np.asarray(values), ms, cs)


def difference_run(
    params: SystemParams, recipe_a: str, recipe_b: str, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Advance two vector-model runs with different ICs on one clock.

    Returns per-step times and the relative difference between the two
    solutions (second run in the denominator).
    """
    grid = make_grid(n)
    source = default_source(grid)
    a0 = initial_condition(recipe_a, grid, params.bc_mode)
    b0 = initial_condition(recipe_b, grid, params.bc_mode)
    solver_a, solver_b = PressureSolver(), PressureSolver()
    sa = init_m_state(a0, source, params, solver_a)
    sb = init_m_state(b0, source, params, solver_b)
    times = [0.0]
    diffs = [diff_metric(sa.m, sb.m)]
    while sa.t < params.t_fin - 1e-9 * params.dt:
        sa = adi_step_m(sa, solver_a)
        sb = adi_step_m(sb, solver_b)
        times.append(sa.t)
        diffs.append(diff_metric(sa.m, sb.m))
    return np.asarray(times), np.asarray(diffs)
