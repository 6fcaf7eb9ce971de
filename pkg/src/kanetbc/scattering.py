"""Open-boundary solver for the order-2s stationary Schrodinger equation.

The interior problem on [0, L] is integrated as a first-order system of
dimension 2s through a fundamental matrix with identity initial data, one
block per potential segment (subdivided where evanescent growth would
degrade conditioning).  Transparent boundary conditions couple the
interior endpoint states to exterior mode expansions; eliminating the
reflection/transmission amplitudes leaves a linear system for the
derivative vector at x = 0.  When accumulated mode growth across the
domain is mild the system is the dense 2s x 2s one; otherwise the solver
keeps every block-interface state as an unknown (multiple shooting),
which stays well conditioned for arbitrarily long evanescent stretches.

Amplitude conventions: reflected amplitudes are referenced at the
incidence boundary, transmitted amplitudes at the exit boundary, so both
stay O(1) even for strongly evanescent modes.  For left incidence
(k > 0):

    psi(x) = exp(ikx) + sum_j r_j exp(-i k_j x)          x < 0
    psi(x) = sum_j t_j exp(+i kt_j (x - L))              x > L

and mirrored for right incidence (k < 0), with all contact wave vectors
on the canonical branch (real positive or decaying).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .dispersion import (
    DispersionModel,
    ModeSet,
    Side,
    dispersion_rhs_polynomial,
    solve_wave_vectors,
    truncated_energy,
)
from .potential import PiecewisePotential, Segment


class ScatteringError(RuntimeError):
    """Base class for solver failures."""


class EvanescentIncident(ScatteringError):
    """The requested incident wave vector is not a propagating contact mode."""


class IntegrationOverflow(ScatteringError):
    """A fundamental-solution component exceeded the overflow guard."""


class StepFailure(ScatteringError):
    """The ODE integrator failed to meet its tolerances."""


class SingularSystem(ScatteringError):
    """The boundary-condition system is numerically singular."""


class MissingDerivatives(ScatteringError):
    """A solution's derivative table is shallower than required."""


@dataclass(frozen=True)
class GridSpec:
    """Discretization and solver controls.

    points_per_nm sets the output grid density (uniform within each
    potential segment, breakpoints always included).  The integrator is an
    adaptive explicit Runge-Kutta scheme; constant-potential segments are
    advanced by the exact matrix exponential instead.  growth_cap bounds
    the evanescent amplification allowed within one integration block and
    single_shoot_guard the accumulated amplification tolerated before the
    solver switches to the multiple-shooting formulation.
    """

    points_per_nm: float = 8.0
    min_points_per_segment: int = 8
    rtol: float = 1e-10
    atol: float = 1e-10
    method: str = "DOP853"
    max_step: float | None = None
    growth_cap: float = 1e3
    single_shoot_guard: float = 1e5
    overflow_guard: float = 1e12
    cond_max: float = 1e12


@dataclass(frozen=True)
class ScatteringProblem:
    """A single-energy open-boundary problem.

    incident_k is signed: positive injects at x = 0, negative at x = L.
    The energy and both contact mode sets are derived, not free.
    """

    model: DispersionModel
    potential: PiecewisePotential
    incident_k: float
    energy: float
    left_modes: ModeSet
    right_modes: ModeSet

    @property
    def order_half(self) -> int:
        return self.model.order_half

    @property
    def injects_left(self) -> bool:
        return self.incident_k > 0


def build_problem(
    model: DispersionModel, potential: PiecewisePotential, incident_k: float
) -> ScatteringProblem:
    """Derive energy and contact modes for a signed incident wave vector."""
    if incident_k == 0.0 or not math.isfinite(incident_k):
        raise ValueError("incident wave vector must be nonzero and finite")
    q = model.params.q
    v_inject = potential.left_value if incident_k > 0 else potential.right_value
    energy = truncated_energy(abs(incident_k), model) - q * v_inject

    left = solve_wave_vectors(energy, potential.left_value, model, Side.LEFT)
    right = solve_wave_vectors(energy, potential.right_value, model, Side.RIGHT)

    inject_set = left if incident_k > 0 else right
    match = min(inject_set.modes, key=lambda m: abs(m.k - abs(incident_k)))
    if not match.is_propagating or abs(match.k - abs(incident_k)) > 1e-6 * max(1.0, abs(incident_k)):
        raise EvanescentIncident(
            f"incident k = {incident_k} is not a propagating mode of the injection contact"
        )
    return ScatteringProblem(
        model=model,
        potential=potential,
        incident_k=incident_k,
        energy=energy,
        left_modes=left,
        right_modes=right,
    )


# ---------------------------------------------------------------------------
# fundamental-set integration


@dataclass(frozen=True)
class FundamentalBlock:
    """Fundamental matrix of one integration block, identity at its left edge.

    values[n] is the 2s x 2s real matrix Phi(grid[n]) with Phi(x_lo) = I;
    values[-1] is the block transfer matrix.
    """

    x_lo: float
    x_hi: float
    grid: np.ndarray
    values: np.ndarray

    @property
    def transfer(self) -> np.ndarray:
        return self.values[-1]


@dataclass(frozen=True)
class FundamentalSet:
    """Blockwise fundamental solutions spanning [0, L].

    Equivalent to the 2s canonical solutions phi_p with phi_p^(l)(0) =
    delta_pl: chaining the block transfers left to right reproduces their
    global derivative table.
    """

    blocks: tuple[FundamentalBlock, ...]
    order_half: int
    log_growth_estimate: float

    @property
    def grid(self) -> np.ndarray:
        parts = [self.blocks[0].grid]
        parts.extend(b.grid[1:] for b in self.blocks[1:])
        return np.concatenate(parts)

    def endpoint_matrix(self, guard: float = 1e12) -> np.ndarray:
        """Global Phi(L) by chaining block transfers; guards against overflow."""
        phi = np.eye(2 * self.order_half)
        for b in self.blocks:
            phi = b.transfer @ phi
            if np.max(np.abs(phi)) > guard:
                raise IntegrationOverflow(
                    "chained fundamental matrix exceeded the overflow guard; "
                    "use the multiple-shooting path"
                )
        return phi


def _companion_matrix(model: DispersionModel, w: float) -> np.ndarray:
    """First-order system matrix at local energy offset w = qV + E."""
    s = model.order_half
    n = 2 * s
    b = model.ode_coeffs()
    m = np.zeros((n, n))
    m[np.arange(n - 1), np.arange(1, n)] = 1.0
    m[n - 1, 0] = w / b[-1]
    for j in range(1, s):
        m[n - 1, 2 * j] = -b[j - 1] / b[-1]
    return m


def _max_decay_rate(model: DispersionModel, w: float) -> float:
    """Largest |Im k| over the local dispersion roots at offset w."""
    a_full = dispersion_rhs_polynomial(model, w)
    if model.order_half == 1:
        u = np.array([w / model.gamma2_unit], dtype=complex)
    else:
        u = np.polynomial.polynomial.polyroots(a_full)
    return float(np.max(np.abs(np.imag(np.sqrt(u.astype(complex))))))


def _segment_growth_rate(model: DispersionModel, seg: Segment, energy: float) -> float:
    q = model.params.q
    xs = (seg.x_lo, 0.5 * (seg.x_lo + seg.x_hi), seg.x_hi)
    return max(_max_decay_rate(model, q * seg.value(x) + energy) for x in xs)


def _block_edges(seg: Segment, rate: float, spec: GridSpec) -> list[float]:
    length = seg.x_hi - seg.x_lo
    max_len = math.inf if rate <= 0.0 else math.log(spec.growth_cap) / rate
    n_blocks = max(1, math.ceil(length / max_len)) if math.isfinite(max_len) else 1
    return list(np.linspace(seg.x_lo, seg.x_hi, n_blocks + 1))


def _segment_grid(seg: Segment, spec: GridSpec) -> np.ndarray:
    n_iv = max(
        spec.min_points_per_segment - 1, math.ceil((seg.x_hi - seg.x_lo) * spec.points_per_nm)
    )
    return np.linspace(seg.x_lo, seg.x_hi, n_iv + 1)


def canonical_grid(potential: PiecewisePotential, spec: GridSpec) -> np.ndarray:
    """Output sample points: uniform per potential segment, breakpoints shared.

    Depends only on the potential and the grid spec, never on the energy,
    so solutions at different incident wave vectors can be accumulated
    point by point.
    """
    parts = [_segment_grid(potential.segments[0], spec)]
    parts.extend(_segment_grid(s, spec)[1:] for s in potential.segments[1:])
    return np.concatenate(parts)


def _block_grid(x_lo: float, x_hi: float, seg_grid: np.ndarray) -> np.ndarray:
    inner = seg_grid[(seg_grid > x_lo) & (seg_grid < x_hi)]
    return np.concatenate(([x_lo], inner, [x_hi]))


def _integrate_block(
    model: DispersionModel,
    seg: Segment,
    x_lo: float,
    x_hi: float,
    energy: float,
    spec: GridSpec,
    seg_grid: np.ndarray,
) -> FundamentalBlock:
    n = 2 * model.order_half
    grid = _block_grid(x_lo, x_hi, seg_grid)
    q = model.params.q

    if seg.slope == 0.0:
        m = _companion_matrix(model, q * seg.v0 + energy)
        steps: dict[float, np.ndarray] = {}
        values = np.empty((len(grid), n, n))
        values[0] = np.eye(n)
        for i in range(1, len(grid)):
            h = grid[i] - grid[i - 1]
            if h not in steps:
                steps[h] = expm(m * h)
            values[i] = steps[h] @ values[i - 1]
    else:
        b = model.ode_coeffs()
        b_lead = b[-1]
        b_mid = b[:-1]
        even = np.arange(2, n, 2)
        w0 = q * seg.value(x_lo) + energy
        wslope = q * seg.slope

        def rhs(x, y):
            yy = y.reshape(n, n)
            out = np.empty_like(yy)
            out[:-1] = yy[1:]
            out[-1] = ((w0 + wslope * (x - x_lo)) * yy[0] - b_mid @ yy[even]) / b_lead
            return out.reshape(-1)

        kwargs = {}
        if spec.max_step is not None:
            kwargs["max_step"] = spec.max_step
        sol = solve_ivp(
            rhs,
            (x_lo, x_hi),
            np.eye(n).reshape(-1),
            method=spec.method,
            t_eval=grid,
            rtol=spec.rtol,
            atol=spec.atol,
            **kwargs,
        )
        if not sol.success:
            raise StepFailure(f"integrator failed on [{x_lo}, {x_hi}]: {sol.message}")
        values = sol.y.T.reshape(len(grid), n, n)

    peak = float(np.max(np.abs(values)))
    if peak > spec.overflow_guard:
        raise IntegrationOverflow(
            f"fundamental solution reached {peak:.3e} on [{x_lo}, {x_hi}]"
        )
    return FundamentalBlock(x_lo=x_lo, x_hi=x_hi, grid=grid, values=values)


def integrate_fundamental_set(problem: ScatteringProblem, spec: GridSpec) -> FundamentalSet:
    """Integrate the canonical fundamental solutions across the device.

    Each potential segment becomes one or more integration blocks, each
    restarted from identity data, so no block amplifies beyond the
    configured growth cap.  Constant segments use the exact matrix
    exponential; sloped segments the adaptive integrator.
    """
    blocks = []
    log_growth = 0.0
    for seg in problem.potential.segments:
        rate = _segment_growth_rate(problem.model, seg, problem.energy)
        edges = _block_edges(seg, rate, spec)
        log_growth += rate * (seg.x_hi - seg.x_lo)
        seg_grid = _segment_grid(seg, spec)
        for lo, hi in zip(edges, edges[1:]):
            blocks.append(
                _integrate_block(problem.model, seg, lo, hi, problem.energy, spec, seg_grid)
            )
    return FundamentalSet(
        blocks=tuple(blocks),
        order_half=problem.order_half,
        log_growth_estimate=log_growth,
    )


# ---------------------------------------------------------------------------
# transparent boundary conditions


def _exterior_basis(wave_vectors: np.ndarray, sign: int, n_rows: int) -> np.ndarray:
    """Derivative columns of exp(sign * i * k * xi) at xi = 0: (sign*i*k)^l."""
    ik = sign * 1j * wave_vectors
    return np.vander(ik, n_rows, increasing=True).T


def _incident_vector(k_signed: float, n_rows: int) -> np.ndarray:
    return (1j * k_signed) ** np.arange(n_rows)


def _dtn_matrix(basis: np.ndarray) -> np.ndarray:
    """Map of the first s derivative orders onto the next s for a mode family."""
    s = basis.shape[1]
    top = basis[:s]
    bot = basis[s:]
    try:
        return bot @ np.linalg.inv(top)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("exterior mode basis is singular") from exc


def _boundary_rows(problem: ScatteringProblem):
    """TBC row blocks ([-M | I], rhs) for x = 0 and x = L."""
    s = problem.order_half
    n = 2 * s
    left_basis = _exterior_basis(problem.left_modes.wave_vectors, -1, n)
    right_basis = _exterior_basis(problem.right_modes.wave_vectors, +1, n)
    m_left = _dtn_matrix(left_basis)
    m_right = _dtn_matrix(right_basis)
    row_left = np.hstack([-m_left, np.eye(s)])
    row_right = np.hstack([-m_right, np.eye(s)])

    v = _incident_vector(problem.incident_k, n)
    rhs_inject = v[s:] - (m_left if problem.injects_left else m_right) @ v[:s]
    if problem.injects_left:
        return (row_left, rhs_inject), (row_right, np.zeros(s, dtype=complex))
    return (row_left, np.zeros(s, dtype=complex)), (row_right, rhs_inject)


def assemble_tbc_system(problem: ScatteringProblem, fundamental_at_l: np.ndarray):
    """Dense 2s x 2s boundary system A c = b for c_p = psi^(p)(0).

    Rows 1..s express the transparent condition at x = 0 and rows s+1..2s
    the one at x = L through the endpoint fundamental matrix.  The
    incident-wave data sits on the injection side's rows.
    """
    (row0, rhs0), (row_l, rhs_l) = _boundary_rows(problem)
    a = np.vstack([row0, row_l @ fundamental_at_l]).astype(complex)
    b = np.concatenate([rhs0, rhs_l])
    return a, b


# ---------------------------------------------------------------------------
# solving


@dataclass(frozen=True)
class ScatteringSolution:
    """Interior solution plus exterior amplitudes of one scattering problem.

    derivatives[l, i] holds psi^(l) at grid[i] for l = 0..2s-1.  Reflection
    amplitudes are referenced at the incidence boundary, transmission
    amplitudes at the exit boundary (see module docstring).
    """

    problem: ScatteringProblem
    grid: np.ndarray
    derivatives: np.ndarray
    coefficients: np.ndarray
    reflection_amplitudes: np.ndarray
    transmission_amplitudes: np.ndarray
    condition_estimate: float
    boundary_mismatch: float
    used_multiple_shooting: bool = False

    @property
    def wavefunction(self) -> np.ndarray:
        return self.derivatives[0]

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.wavefunction) ** 2

    def derivative_table(self, min_order: int) -> np.ndarray:
        if self.derivatives.shape[0] < min_order:
            raise MissingDerivatives(
                f"need derivatives up to order {min_order - 1}, have {self.derivatives.shape[0]}"
            )
        return self.derivatives


def _amplitudes_from_states(problem: ScatteringProblem, y0: np.ndarray, ym: np.ndarray):
    """Recover (r_j, t_j) and the exterior-match residual from endpoint states."""
    s = problem.order_half
    n = 2 * s
    left_basis = _exterior_basis(problem.left_modes.wave_vectors, -1, n)
    right_basis = _exterior_basis(problem.right_modes.wave_vectors, +1, n)
    v = _incident_vector(problem.incident_k, n)

    if problem.injects_left:
        refl_basis, refl_state = left_basis, y0
        trans_basis, trans_state = right_basis, ym
    else:
        refl_basis, refl_state = right_basis, ym
        trans_basis, trans_state = left_basis, y0

    r = np.linalg.solve(refl_basis[:s], refl_state[:s] - v[:s])
    t = np.linalg.solve(trans_basis[:s], trans_state[:s])

    scale = max(1.0, float(np.max(np.abs(refl_state))), float(np.max(np.abs(trans_state))))
    res_r = np.max(np.abs(refl_state - v - refl_basis @ r))
    res_t = np.max(np.abs(trans_state - trans_basis @ t))
    return r, t, float(max(res_r, res_t) / scale)


def _states_single_shooting(problem: ScatteringProblem, fund: FundamentalSet, spec: GridSpec):
    prefixes = [np.eye(2 * problem.order_half)]
    for b in fund.blocks[:-1]:
        prefixes.append(b.transfer @ prefixes[-1])
    phi_l = fund.blocks[-1].transfer @ prefixes[-1]

    a, rhs = assemble_tbc_system(problem, phi_l)
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > spec.cond_max:
        raise SingularSystem(f"boundary system condition estimate {cond:.3e}")
    c = np.linalg.solve(a, rhs)
    states = [p @ c for p in prefixes]
    states.append(phi_l @ c)
    return states, cond


def _states_multiple_shooting(problem: ScatteringProblem, fund: FundamentalSet, spec: GridSpec):
    """Solve with every block-interface state kept as an unknown.

    The system stacks y_{i+1} = T_i y_i for all blocks between the two
    transparent-boundary row blocks; no product of transfers is ever
    formed, so conditioning stays governed by the per-block growth cap.
    """
    s = problem.order_half
    n = 2 * s
    m = len(fund.blocks)
    dim = n * (m + 1)
    (row0, rhs0), (row_l, rhs_l) = _boundary_rows(problem)

    a = np.zeros((dim, dim), dtype=complex)
    b = np.zeros(dim, dtype=complex)
    a[:s, :n] = row0
    b[:s] = rhs0
    for i, blk in enumerate(fund.blocks):
        r0 = s + i * n
        a[r0 : r0 + n, i * n : (i + 1) * n] = blk.transfer
        a[r0 : r0 + n, (i + 1) * n : (i + 2) * n] = -np.eye(n)
    a[s + m * n :, m * n :] = row_l
    b[s + m * n :] = rhs_l

    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > spec.cond_max:
        raise SingularSystem(f"multiple-shooting system condition estimate {cond:.3e}")
    y = np.linalg.solve(a, b)
    states = [y[i * n : (i + 1) * n] for i in range(m + 1)]
    return states, cond


def solve_scattering(
    problem: ScatteringProblem, spec: GridSpec | None = None
) -> ScatteringSolution:
    """Solve the open-boundary problem and tabulate all derivative orders."""
    spec = spec or GridSpec()
    fund = integrate_fundamental_set(problem, spec)

    use_multiple = math.exp(min(fund.log_growth_estimate, 700.0)) > spec.single_shoot_guard
    if use_multiple:
        states, cond = _states_multiple_shooting(problem, fund, spec)
    else:
        states, cond = _states_single_shooting(problem, fund, spec)

    n = 2 * problem.order_half
    parts = []
    for i, blk in enumerate(fund.blocks):
        tab = blk.values @ states[i]
        parts.append(tab if i == 0 else tab[1:])
    derivatives = np.concatenate(parts, axis=0).T
    grid = fund.grid

    r, t, mismatch = _amplitudes_from_states(problem, states[0], states[-1])
    return ScatteringSolution(
        problem=problem,
        grid=grid,
        derivatives=derivatives,
        coefficients=np.asarray(states[0], dtype=complex),
        reflection_amplitudes=r,
        transmission_amplitudes=t,
        condition_estimate=cond,
        boundary_mismatch=mismatch,
        used_multiple_shooting=use_multiple,
    )
