"""Pointwise model terms, discrete energies, and flux diagnostics.

Covers both conductivity descriptions: the vector model (metabolic coefficient
|m|^(2(gamma-1)), cubic activation) and the symmetric-tensor model (metabolic
coefficient (|C|_F + eps)^(gamma-2), quadratic activation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularCoefficientError
from .grid import (
    GRAD_MODES,
    ScalarField,
    SymTensorField2,
    VectorField2,
    dx,
    dy,
)

BC_MODES = ("dirichlet_zero", "steady_state_flux")

# floor on |m| for the singular metabolic exponent range gamma < 1; the huge
# resulting coefficient sits on the implicit side, so it only damps m to zero
DELTA_M = 1e-14


@dataclass(frozen=True)
class SystemParams:
    """Model and integrator parameters for one conductivity system."""

    D: float
    c: float
    alpha: float
    gamma: float
    r: float
    epsilon: float = 0.0
    dt: float = 0.01
    t_fin: float = 1.0
    bc_mode: str = "dirichlet_zero"
    grad_mode: str = "mirror"
    poisson_tol: float = 1e-10

    def __post_init__(self):
        if self.D < 0 or self.c < 0 or self.alpha < 0 or self.epsilon < 0:
            raise ValueError("D, c, alpha, epsilon must be nonnegative")
        if self.gamma <= 0:
            raise ValueError(f"metabolic exponent must be positive, got gamma={self.gamma}")
        if self.r <= 0:
            raise ValueError(f"background permeability must be positive, got r={self.r}")
        if self.dt <= 0 or self.t_fin < 0:
            raise ValueError("need dt > 0 and t_fin >= 0")
        if self.bc_mode not in BC_MODES:
            raise ValueError(f"unknown bc_mode {self.bc_mode!r}; expected one of {BC_MODES}")
        if self.grad_mode not in GRAD_MODES:
            raise ValueError(f"unknown grad_mode {self.grad_mode!r}; expected one of {GRAD_MODES}")
        if self.poisson_tol <= 0:
            raise ValueError("poisson_tol must be positive")


@dataclass(frozen=True, eq=False)
class ActivationFields:
    """Squared/cross products of the pressure gradient components."""

    px2: ScalarField
    py2: ScalarField
    pxy: ScalarField


def activation_terms(p: ScalarField, grad_mode: str = "mirror") -> ActivationFields:
    """(dp/dx)^2, (dp/dy)^2 and the cross product (dp/dx)(dp/dy)."""
    gx = dx(p, grad_mode).values
    gy = dy(p, grad_mode).values
    g = p.grid
    return ActivationFields(
        ScalarField(g, gx * gx),
        ScalarField(g, gy * gy),
        ScalarField(g, gx * gy),
    )


def metabolic_coeff_m(m: VectorField2, gamma: float) -> ScalarField:
    """Pointwise |m|^(2(gamma-1)); |m| is floored at DELTA_M when gamma < 1."""
    if gamma <= 0:
        raise ValueError(f"metabolic exponent must be positive, got gamma={gamma}")
    mag = np.hypot(m.c1.values, m.c2.values)
    if gamma < 1.0:
        mag = np.maximum(mag, DELTA_M)
    return ScalarField(m.grid, mag ** (2.0 * (gamma - 1.0)))


def frobenius_norm_field(C: SymTensorField2) -> ScalarField:
    """Pointwise Frobenius norm sqrt(C11^2 + 2 C12^2 + C22^2)."""
    v = np.sqrt(C.c11.values**2 + 2.0 * C.c12.values**2 + C.c22.values**2)
    return ScalarField(C.grid, v)


def metabolic_coeff_c(C: SymTensorField2, gamma: float, epsilon: float) -> ScalarField:
    """Pointwise (|C|_F + eps)^(gamma-2)."""
    if gamma <= 0:
        raise ValueError(f"metabolic exponent must be positive, got gamma={gamma}")
    if epsilon < 0:
        raise ValueError(f"regularization must be nonnegative, got epsilon={epsilon}")
    fro = frobenius_norm_field(C).values
    if gamma < 2.0 and epsilon == 0.0 and np.any(fro == 0.0):
        raise SingularCoefficientError(
            "metabolic coefficient singular: gamma < 2 with epsilon = 0 at a cell where |C| = 0"
        )
    return ScalarField(C.grid, (fro + epsilon) ** (gamma - 2.0))


def energy_vect(m: VectorField2, p: ScalarField, params: SystemParams) -> float:
    """Discrete energy of the vector model.

    Midpoint quadrature of D^2 |grad m|^2 + c^2 grad p . P[m x m] grad p
    + (alpha/gamma) |m|^(2 gamma).  Assumes p solves the pressure problem
    for the permeability of m (not checked here).
    """
    g = m.grid
    mode = params.grad_mode
    m1, m2 = m.c1.values, m.c2.values
    dirich = 0.0
    if params.D != 0.0:
        dirich = (
            dx(m.c1, mode).values ** 2
            + dy(m.c1, mode).values ** 2
            + dx(m.c2, mode).values ** 2
            + dy(m.c2, mode).values ** 2
        )
        dirich = params.D**2 * dirich
    gx = dx(p, mode).values
    gy = dy(p, mode).values
    activ = params.c**2 * (params.r * (gx * gx + gy * gy) + (m1 * gx + m2 * gy) ** 2)
    metab = (params.alpha / params.gamma) * (m1 * m1 + m2 * m2) ** params.gamma
    return float(g.h**2 * np.sum(dirich + activ + metab))


def energy_tens(C: SymTensorField2, p: ScalarField, params: SystemParams) -> float:
    """Discrete energy of the tensor model.

    Midpoint quadrature of (D^2/2) |grad C|^2 (the off-diagonal entry counts
    twice) + c^2 grad p . P[C] grad p + (alpha/gamma) |C|_F^gamma.
    """
    g = C.grid
    mode = params.grad_mode
    c11, c12, c22 = C.c11.values, C.c12.values, C.c22.values
    dirich = 0.0
    if params.D != 0.0:
        dirich = (
            dx(C.c11, mode).values ** 2
            + dy(C.c11, mode).values ** 2
            + 2.0 * (dx(C.c12, mode).values ** 2 + dy(C.c12, mode).values ** 2)
            + dx(C.c22, mode).values ** 2
            + dy(C.c22, mode).values ** 2
        )
        dirich = 0.5 * params.D**2 * dirich
    gx = dx(p, mode).values
    gy = dy(p, mode).values
    activ = params.c**2 * (
        params.r * (gx * gx + gy * gy)
        + c11 * gx * gx
        + 2.0 * c12 * gx * gy
        + c22 * gy * gy
    )
    fro = np.sqrt(c11 * c11 + 2.0 * c12 * c12 + c22 * c22)
    metab = (params.alpha / params.gamma) * fro**params.gamma
    return float(g.h**2 * np.sum(dirich + activ + metab))


@dataclass(frozen=True, eq=False)
class Flux:
    components: VectorField2
    magnitude: ScalarField


def flux(C: SymTensorField2, p: ScalarField, grad_mode: str = "mirror") -> Flux:
    """Network flux C grad p and its pointwise magnitude.

    For the vector model pass the conductivity part m x m (the permeability
    minus its isotropic background).
    """
    if C.grid != p.grid:
        raise ValueError("tensor and pressure live on different grids")
    gx = dx(p, grad_mode).values
    gy = dy(p, grad_mode).values
    f1 = C.c11.values * gx + C.c12.values * gy
    f2 = C.c12.values * gx + C.c22.values * gy
    g = C.grid
    comp = VectorField2(ScalarField(g, f1), ScalarField(g, f2))
    return Flux(comp, ScalarField(g, np.hypot(f1, f2)))
