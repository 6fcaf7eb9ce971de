"""Kane dispersion relation, its power-series truncation, and wave-vector solvers.

The Kane band model relates energy and wave vector implicitly through
``eps * (1 + alpha*eps) = gamma^2`` with ``gamma^2 = (hbar^2/2m*) k^2``.
Expanding the explicit solution in powers of ``alpha*gamma^2`` and
truncating after ``s`` terms yields the dispersion polynomial that governs
the order-2s stationary Schrodinger equation.  This module provides the
expansion coefficients (exact rationals), the exact and truncated energy
evaluations, and the solver for the s complex wave vectors ("modes") at a
given energy and contact potential.

Internal unit system: energies in eV, lengths in nm.  The single constant
``hbar^2/(2 m*)`` in eV*nm^2 carries all dimensional content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

# Physical constants (CODATA 2018)
HBAR_J_S = 1.054571817e-34      # reduced Planck constant (J*s)
HBAR_EV_S = 6.582119569e-16     # reduced Planck constant (eV*s)
HBAR_EV_FS = 0.6582119569       # reduced Planck constant (eV*fs)
ELECTRON_MASS_KG = 9.1093837015e-31
ELEMENTARY_CHARGE_C = 1.602176634e-19
BOLTZMANN_EV_K = 8.617333262e-5  # Boltzmann constant (eV/K)

# hbar^2/(2 m_e) in eV*nm^2; divide by the relative effective mass to get
# the gamma^2 unit of a material.
HBAR2_OVER_2ME_EV_NM2 = HBAR_J_S**2 / (2.0 * ELECTRON_MASS_KG * ELEMENTARY_CHARGE_C) * 1e18

# Classification tolerances (see module design notes): a squared wave
# vector counts as real when its imaginary part is below TOL_IM relative
# to its magnitude; two modes count as degenerate below TOL_DEG.
TOL_IM = 1e-10
TOL_DEG = 1e-8
TOL_ROOT_RESIDUAL = 1e-10


class DegenerateModes(ValueError):
    """Two wave vectors coincide; the boundary-condition algebra breaks down."""


class NoBoundedBranch(ValueError):
    """No square-root branch yields a bounded exponential (inconsistent inputs)."""


class ModeKind(Enum):
    PROPAGATING = "propagating"
    EVANESCENT = "evanescent"


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class PhysicalParams:
    """Material and statistics parameters.

    m_eff is the relative effective mass (units of the free-electron mass),
    alpha the non-parabolicity factor in 1/eV, q the particle charge in
    units of the elementary charge.  fermi_energy may stay None for pure
    scattering work; ensemble calculations require it explicitly.
    """

    m_eff: float = 0.067
    alpha: float = 0.242
    q: float = 1.0
    temperature: float = 300.0
    fermi_energy: float | None = None
    g_s: int = 2
    g_v: int = 1

    def __post_init__(self):
        if self.m_eff <= 0:
            raise ValueError("m_eff must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.g_s < 1 or self.g_v < 1:
            raise ValueError("degeneracies must be positive integers")

    @property
    def gamma2_unit(self) -> float:
        """hbar^2/(2 m*) in eV*nm^2."""
        return HBAR2_OVER_2ME_EV_NM2 / self.m_eff


def kane_coefficients(s: int) -> list[Fraction]:
    """Exact expansion coefficients c_1..c_s of the Kane energy series.

    c_j = binom(1/2, j) * 2^(2j-1), evaluated in rational arithmetic.  The
    values follow the signed-Catalan pattern 1, -1, 2, -5, 14, ...
    """
    if s < 1:
        raise ValueError("series order s must be >= 1")
    coeffs = []
    binom = Fraction(1)  # binom(1/2, 0)
    for j in range(1, s + 1):
        binom = binom * (Fraction(1, 2) - (j - 1)) / j
        coeffs.append(binom * Fraction(2) ** (2 * j - 1))
    return coeffs


def kane_energy_exact(k: float, params: PhysicalParams) -> float:
    """Exact Kane energy for a real wave-vector magnitude k (1/nm), in eV.

    Falls back to the parabolic branch gamma^2 when alpha = 0.
    """
    gamma2 = params.gamma2_unit * k * k
    if params.alpha == 0.0:
        return gamma2
    return (-1.0 + math.sqrt(1.0 + 4.0 * params.alpha * gamma2)) / (2.0 * params.alpha)


@dataclass(frozen=True)
class DispersionModel:
    """Truncated Kane dispersion of order 2s.

    Stores the series order s, the float expansion coefficients, and the
    material parameters.  With alpha = 0 every term beyond the first
    vanishes identically, so the model collapses to s = 1 (parabolic) at
    construction time regardless of the requested order.
    """

    order_half: int
    params: PhysicalParams = field(default_factory=PhysicalParams)

    def __post_init__(self):
        if self.order_half < 1:
            raise ValueError("order_half (s) must be >= 1")
        if self.params.alpha == 0.0 and self.order_half != 1:
            object.__setattr__(self, "order_half", 1)

    @property
    def coeffs(self) -> np.ndarray:
        """Series coefficients c_1..c_s as floats."""
        return np.array([float(c) for c in kane_coefficients(self.order_half)])

    @property
    def gamma2_unit(self) -> float:
        return self.params.gamma2_unit

    def energy_poly_coeffs(self) -> np.ndarray:
        """Coefficients a_p = c_p alpha^(p-1) unit^p of the polynomial in u = k^2.

        truncated_energy(k) = sum_p a_p * (k^2)^p.  Index 0 of the returned
        array corresponds to p = 1.
        """
        s = self.order_half
        alpha = self.params.alpha
        unit = self.gamma2_unit
        c = self.coeffs
        p = np.arange(1, s + 1)
        return c * alpha ** (p - 1) * unit**p

    def ode_coeffs(self) -> np.ndarray:
        """Coefficients b_p = c_p alpha^(p-1) (-unit)^p multiplying psi^(2p).

        The stationary equation reads sum_p b_p psi^(2p) = (qV + E) psi.
        """
        s = self.order_half
        alpha = self.params.alpha
        unit = self.gamma2_unit
        c = self.coeffs
        p = np.arange(1, s + 1)
        return c * alpha ** (p - 1) * (-unit) ** p


def truncated_energy(k: float, model: DispersionModel) -> float:
    """Order-s partial sum of the Kane series at real k (1/nm), in eV."""
    a = model.energy_poly_coeffs()
    u = k * k
    return float(np.polynomial.polynomial.polyval(u, np.concatenate(([0.0], a))))


def group_velocity_scaled(k: float, model: DispersionModel) -> float:
    """d(eps)/dk of the truncated dispersion, in eV*nm.

    Equals hbar times the plane-wave probability current carried by
    exp(ikx), which changes sign where the truncated band bends over.
    """
    a = model.energy_poly_coeffs()
    p = np.arange(1, model.order_half + 1)
    return float(np.sum(a * 2 * p * k ** (2 * p - 1)))


@dataclass(frozen=True)
class Mode:
    """One wave vector of a contact mode set."""

    k: complex
    kind: ModeKind

    @property
    def is_propagating(self) -> bool:
        return self.kind is ModeKind.PROPAGATING


@dataclass(frozen=True)
class ModeSet:
    """The s wave vectors admissible on one semi-infinite contact.

    Wave vectors are stored on the canonical branch: propagating entries
    are real positive, evanescent entries have positive imaginary part.
    The exterior ansatz applies the sign pattern appropriate to the
    incidence direction (exp(-ikx) on the left contact, exp(+ik(x-L)) on
    the right), which makes every canonical-branch exponential bounded on
    its semi-infinite region for either direction.
    """

    modes: tuple[Mode, ...]
    side: Side

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def wave_vectors(self) -> np.ndarray:
        return np.array([m.k for m in self.modes], dtype=complex)

    @property
    def all_propagating(self) -> bool:
        return all(m.is_propagating for m in self.modes)

    @property
    def propagating(self) -> tuple[Mode, ...]:
        return tuple(m for m in self.modes if m.is_propagating)


def dispersion_rhs_polynomial(model: DispersionModel, energy_rhs: float) -> np.ndarray:
    """Full coefficient vector (ascending powers of u) of P(u) - energy_rhs."""
    a = model.energy_poly_coeffs()
    return np.concatenate(([-energy_rhs], a))


def _poly_residual_scale(a_full: np.ndarray, u: complex) -> float:
    return max(1.0, float(np.sum(np.abs(a_full) * np.abs(u) ** np.arange(len(a_full)))))


def solve_wave_vectors(
    energy: float,
    potential_value: float,
    model: DispersionModel,
    side: Side,
) -> ModeSet:
    """Solve the contact dispersion polynomial for the s admissible modes.

    The right-hand side is W = q*V + E with the contact potential V in
    volts.  Roots u_j of the degree-s polynomial in u = k^2 are found as
    companion-matrix eigenvalues, verified by back-substitution, and mapped
    to wave vectors with the bounded branch of the square root.
    """
    w = model.params.q * potential_value + energy
    a_full = dispersion_rhs_polynomial(model, w)
    s = model.order_half
    if s == 1:
        u_roots = np.array([w / model.gamma2_unit], dtype=complex)
    else:
        u_roots = np.polynomial.polynomial.polyroots(a_full)
    u_roots = np.atleast_1d(np.asarray(u_roots, dtype=complex))

    for u in u_roots:
        resid = abs(np.polynomial.polynomial.polyval(u, a_full))
        if resid > TOL_ROOT_RESIDUAL * _poly_residual_scale(a_full, u):
            raise RuntimeError(
                f"dispersion root failed back-substitution (residual {resid:.3e})"
            )

    modes = []
    for u in u_roots:
        if abs(u.imag) <= TOL_IM * max(1.0, abs(u)) and u.real > 0.0:
            modes.append(Mode(k=complex(math.sqrt(u.real)), kind=ModeKind.PROPAGATING))
        else:
            k = complex(np.sqrt(complex(u)))
            if k.imag < 0.0:
                k = -k
            if k.imag <= 0.0:
                raise NoBoundedBranch(f"no bounded branch for squared wave vector {u}")
            modes.append(Mode(k=k, kind=ModeKind.EVANESCENT))

    # propagating modes first (ascending k), then evanescent (ascending decay rate)
    modes.sort(key=lambda m: (m.kind is not ModeKind.PROPAGATING, m.k.real, m.k.imag))

    ks = [m.k for m in modes]
    for i in range(len(ks)):
        for j in range(i + 1, len(ks)):
            if abs(ks[i] - ks[j]) < TOL_DEG:
                raise DegenerateModes(
                    f"wave vectors {ks[i]} and {ks[j]} coincide within {TOL_DEG}"
                )

    return ModeSet(modes=tuple(modes), side=side)
