"""Fermi-Dirac ensembles of incident states: electron density and current.

The 3D momentum integral reduces, in cylindrical coordinates (k_x, sigma,
theta), to a 1D integral over the longitudinal wave vector k_x weighted by
the transverse occupation integral

    w(k_x) = integral_0^inf  sigma * f_FD(eps(sigma, k_x)) dsigma ,

since neither the scattering solution nor its current depends on the
transverse momentum.  Each k_x quadrature node costs one open-boundary
solve; the resulting node table is statistics independent, so Fermi-level
scans and Kane/parabolic statistics comparisons reuse the same solves.

Outputs: electron density n(x) in 1/nm^3 and the total electric current
as the scaled flux sum S = g_s g_v/(2pi)^2 * sum (units 1/(nm^2 fs));
the physical current density is J = -q S = -S * 1.602e14 A/m^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.special import expit

from .dispersion import (
    BOLTZMANN_EV_K,
    ELEMENTARY_CHARGE_C,
    DispersionModel,
    PhysicalParams,
)
from .observables import current_profile
from .potential import PiecewisePotential
from .scattering import (
    GridSpec,
    ScatteringError,
    build_problem,
    canonical_grid,
    solve_scattering,
)

CURRENT_SCALE_A_M2 = ELEMENTARY_CHARGE_C * 1e33  # (1/(nm^2 fs)) -> A/m^2 per unit charge

NODE_RESIDUAL_LIMIT = 1e-8


class StatisticsKind(Enum):
    KANE = "kane"
    PARABOLIC = "parabolic"


def fermi_dirac(energy: float, fermi_energy: float, temperature: float) -> float:
    """Occupation 1/(1 + exp((E - E_F)/kT)); overflow safe for any argument."""
    kt = BOLTZMANN_EV_K * temperature
    return expit((fermi_energy - np.asarray(energy)) / kt)


def transverse_energy(sigma, k_x, params: PhysicalParams, kind: StatisticsKind):
    """Free-electron energy at total wave vector sqrt(sigma^2 + k_x^2), in eV."""
    gamma2 = params.gamma2_unit * (np.asarray(sigma) ** 2 + np.asarray(k_x) ** 2)
    if kind is StatisticsKind.PARABOLIC or params.alpha == 0.0:
        return gamma2
    return (-1.0 + np.sqrt(1.0 + 4.0 * params.alpha * gamma2)) / (2.0 * params.alpha)


def occupation_weight(sigma, k_x, params: PhysicalParams, kind: StatisticsKind):
    """Integrand sigma * f_FD(eps(sigma, k_x)) of the transverse integral."""
    if params.fermi_energy is None:
        raise ValueError("fermi_energy must be set for ensemble calculations")
    eps = transverse_energy(sigma, k_x, params, kind)
    return np.asarray(sigma) * fermi_dirac(eps, params.fermi_energy, params.temperature)


@dataclass(frozen=True)
class SupportBox:
    """Truncation box outside which the occupation integrand is negligible."""

    k_x_max: float
    sigma_max: float
    integrand_max: float


def _bisect_decreasing(fn, lo: float, hi: float, target: float, iters: int = 200) -> float:
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def support_bounds(
    params: PhysicalParams,
    threshold: float,
    kind: StatisticsKind = StatisticsKind.KANE,
) -> SupportBox:
    """Smallest box with integrand < threshold * max outside it.

    The occupation integrand has a single ridge and monotone tails, so the
    bounds follow from bisection along each axis once a bracketing scan
    locates the maximum and a decayed outer radius.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")

    def peak_over_sigma(k_x: float) -> float:
        hi = 1.0
        while occupation_weight(hi, k_x, params, kind) > 1e-320 and hi < 1e3:
            hi *= 2.0
        grid = np.linspace(0.0, hi, 2001)
        return float(np.max(occupation_weight(grid, k_x, params, kind)))

    g_max = peak_over_sigma(0.0)
    target = threshold * g_max

    def sigma_profile(sigma: float) -> float:
        return float(occupation_weight(sigma, 0.0, params, kind))

    hi = 1.0
    while sigma_profile(hi) > target and hi < 1e3:
        hi *= 2.0
    grid = np.linspace(0.0, hi, 2001)
    sigma_peak = float(grid[np.argmax(occupation_weight(grid, 0.0, params, kind))])
    sigma_max = _bisect_decreasing(sigma_profile, sigma_peak, hi, target)

    hi = 1.0
    while peak_over_sigma(hi) > target and hi < 1e3:
        hi *= 2.0
    k_x_max = _bisect_decreasing(peak_over_sigma, 0.0, hi, target)
    return SupportBox(k_x_max=k_x_max, sigma_max=sigma_max, integrand_max=g_max)


def transverse_weight_table(
    k_x, sigma_max: float, n_sigma: int, params: PhysicalParams, kind: StatisticsKind
) -> np.ndarray:
    """w(k_x) by Gauss-Legendre quadrature of the transverse integrand, 1/nm^2."""
    nodes, weights = np.polynomial.legendre.leggauss(n_sigma)
    sig = 0.5 * sigma_max * (nodes + 1.0)
    wq = 0.5 * sigma_max * weights
    k_x = np.atleast_1d(np.asarray(k_x, dtype=float))
    vals = occupation_weight(sig[:, None], k_x[None, :], params, kind)
    return wq @ vals


def neumaier_sum(values) -> float:
    """Compensated summation; node-order permutations stay bit-stable."""
    total = 0.0
    comp = 0.0
    for v in values:
        v = float(v)
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp


def _neumaier_accumulate_vectors(vectors, coeffs) -> np.ndarray:
    total = None
    comp = None
    for vec, c in zip(vectors, coeffs):
        term = c * vec
        if total is None:
            total = term.copy()
            comp = np.zeros_like(term)
            continue
        t = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
    if total is None:
        raise ValueError("no vectors to accumulate")
    return total + comp


# ---------------------------------------------------------------------------
# node table


@dataclass(frozen=True)
class NodeResult:
    """One longitudinal quadrature node: solve outputs and diagnostics."""

    k_x: float
    quad_weight: float
    current: float
    density_profile: np.ndarray
    conservation: float
    error: str | None = None

    @property
    def flagged(self) -> bool:
        return self.error is not None or self.conservation >= NODE_RESIDUAL_LIMIT


@dataclass(frozen=True)
class NodeTable:
    """Scattering solves at all k_x quadrature nodes (statistics independent)."""

    grid: np.ndarray
    nodes: tuple[NodeResult, ...]
    n_solves: int
    panel_error_estimate: float

    @property
    def k_values(self) -> np.ndarray:
        return np.array([n.k_x for n in self.nodes])

    @property
    def flagged_count(self) -> int:
        return sum(1 for n in self.nodes if n.flagged)


def sample_profile(grid: np.ndarray, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Extract values at points that are members of grid (up to roundoff)."""
    idx = np.clip(np.searchsorted(grid, points), 1, len(grid) - 1)
    idx = np.where(np.abs(grid[idx] - points) <= np.abs(grid[idx - 1] - points), idx, idx - 1)
    if np.max(np.abs(grid[idx] - points)) > 1e-9:
        raise ValueError("sample points are not part of the solution grid")
    return values[idx]


def _solve_node(model, potential, k_x, grid_spec, out_grid) -> tuple[float, np.ndarray, float, str | None]:
    try:
        sol = solve_scattering(build_problem(model, potential, k_x), grid_spec)
        prof = current_profile(sol)
    except (ScatteringError, ValueError) as exc:
        zeros = np.zeros(len(out_grid))
        return 0.0, zeros, math.inf, f"{type(exc).__name__}: {exc}"
    dens = sample_profile(sol.grid, sol.density, out_grid)
    return prof.j_transmitted, dens, prof.conservation, None


def _gauss_nodes(lo: float, hi: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


@dataclass
class _Panel:
    lo: float
    hi: float
    k: np.ndarray
    w: np.ndarray
    results: list


def _eval_panel(model, potential, sign, lo, hi, n_per, grid_spec, cache, out_grid) -> _Panel:
    k, w = _gauss_nodes(lo, hi, n_per)
    results = []
    for kk in k:
        key = sign * kk
        if key not in cache:
            cache[key] = _solve_node(model, potential, sign * kk, grid_spec, out_grid)
        results.append(cache[key])
    return _Panel(lo=lo, hi=hi, k=k, w=w, results=results)


def _panel_flux(panel: _Panel, weight_fn) -> float:
    wk = weight_fn(panel.k)
    return float(np.sum(panel.w * wk * np.array([r[0] for r in panel.results])))


def solve_node_table(
    model: DispersionModel,
    potential: PiecewisePotential,
    k_x_max: float,
    n_kx: int,
    grid_spec: GridSpec | None = None,
    include_negative: bool = True,
    adaptive: bool = False,
    adaptive_tol: float = 1e-6,
    adaptive_max_depth: int = 9,
    panel_nodes: int = 16,
    refine_weight_fn=None,
) -> NodeTable:
    """Solve the scattering problem at every longitudinal quadrature node.

    Without adaptivity each sign of k_x carries one Gauss-Legendre panel of
    n_kx/2 nodes on (0, k_x_max].  With adaptivity the panels bisect until
    each panel's contribution to the flux integral is stable within
    adaptive_tol of the running total, which resolves narrow transmission
    resonances without a global node explosion.  refine_weight_fn(k)
    supplies the occupation weight used in that error control (defaults to
    1).  Failed nodes are kept with zero contribution and flagged.
    """
    grid_spec = grid_spec or GridSpec()
    out_grid = canonical_grid(potential, grid_spec)
    signs = (1.0, -1.0) if include_negative else (1.0,)
    n_per_sign = max(2, n_kx // (2 if include_negative else 1))
    weight_fn = refine_weight_fn or (lambda k: np.ones_like(k))

    cache: dict[float, tuple] = {}
    panels_by_sign = {}
    error_estimate = 0.0

    for sign in signs:
        if not adaptive:
            panels_by_sign[sign] = [
                _eval_panel(model, potential, sign, 0.0, k_x_max, n_per_sign, grid_spec, cache, out_grid)
            ]
            continue
        n_base = max(1, n_per_sign // panel_nodes)
        edges = np.linspace(0.0, k_x_max, n_base + 1)
        stack = [
            (lo, hi, _eval_panel(model, potential, sign, lo, hi, panel_nodes, grid_spec, cache, out_grid), 0)
            for lo, hi in zip(edges, edges[1:])
        ]
        done = []
        total_scale = max(abs(sum(_panel_flux(p, weight_fn) for _, _, p, _ in stack)), 1e-300)
        while stack:
            lo, hi, panel, depth = stack.pop()
            mid = 0.5 * (lo + hi)
            left = _eval_panel(model, potential, sign, lo, mid, panel_nodes, grid_spec, cache, out_grid)
            right = _eval_panel(model, potential, sign, mid, hi, panel_nodes, grid_spec, cache, out_grid)
            err = abs(
                _panel_flux(left, weight_fn)
                + _panel_flux(right, weight_fn)
                - _panel_flux(panel, weight_fn)
            )
            if err <= adaptive_tol * total_scale or depth >= adaptive_max_depth:
                done.extend([left, right])
                error_estimate += err
            else:
                stack.append((lo, mid, left, depth + 1))
                stack.append((mid, hi, right, depth + 1))
        panels_by_sign[sign] = sorted(done, key=lambda p: p.lo)

    nodes = []
    for sign in signs:
        for panel in panels_by_sign[sign]:
            for kk, wq, (cur, dens, resid, err) in zip(panel.k, panel.w, panel.results):
                nodes.append(
                    NodeResult(
                        k_x=sign * kk,
                        quad_weight=wq,
                        current=cur,
                        density_profile=dens,
                        conservation=resid,
                        error=err,
                    )
                )

    nodes.sort(key=lambda n: n.k_x)
    return NodeTable(
        grid=out_grid,
        nodes=tuple(nodes),
        n_solves=len(cache),
        panel_error_estimate=error_estimate,
    )


# ---------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class EnsembleConfig:
    """Full specification of one ensemble calculation."""

    model: DispersionModel
    potential: PiecewisePotential
    statistics: StatisticsKind = StatisticsKind.KANE
    n_kx: int = 128
    n_sigma: int = 64
    truncation_threshold: float = 1e-12
    grid_spec: GridSpec = field(default_factory=GridSpec)
    include_negative: bool = True
    adaptive: bool = False
    adaptive_tol: float = 1e-6

    def __post_init__(self):
        if self.n_kx < 4 or self.n_sigma < 2:
            raise ValueError("need n_kx >= 4 and n_sigma >= 2")
        if not 0.0 < self.truncation_threshold < 1.0:
            raise ValueError("truncation threshold must lie in (0, 1)")


@dataclass(frozen=True)
class EnsembleResult:
    """Ensemble density, current, and per-node diagnostics."""

    grid: np.ndarray
    density: np.ndarray
    flux_sum: float
    current_a_m2: float
    box: SupportBox
    fermi_energy: float
    statistics: StatisticsKind
    table: NodeTable
    sigma_weights: np.ndarray
    quality: dict


def assemble_ensemble(
    table: NodeTable,
    box: SupportBox,
    params: PhysicalParams,
    statistics: StatisticsKind,
    n_sigma: int,
    fermi_energy: float | None = None,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Weight a node table with Fermi-Dirac statistics.

    Returns (density profile, scaled flux sum S, per-node sigma weights).
    The electric current density is -q * S.  Reusing one table with
    different Fermi levels or statistics kinds costs no new solves.
    """
    if fermi_energy is not None:
        params = replace(params, fermi_energy=fermi_energy)
    k_vals = np.array([n.k_x for n in table.nodes])
    w_sigma = transverse_weight_table(np.abs(k_vals), box.sigma_max, n_sigma, params, statistics)
    prefactor = params.g_s * params.g_v / (2.0 * math.pi) ** 2

    coeffs = np.array([n.quad_weight for n in table.nodes]) * w_sigma
    flux = prefactor * neumaier_sum(c * n.current for c, n in zip(coeffs, table.nodes))
    density = prefactor * _neumaier_accumulate_vectors(
        (n.density_profile for n in table.nodes), coeffs
    )
    return density, flux, w_sigma


def run_ensemble(config: EnsembleConfig) -> EnsembleResult:
    """Solve all quadrature nodes and assemble density and current."""
    params = config.model.params
    if params.fermi_energy is None:
        raise ValueError("fermi_energy must be set for ensemble calculations")
    box = support_bounds(params, config.truncation_threshold, config.statistics)

    def refine_weight(k):
        return transverse_weight_table(k, box.sigma_max, config.n_sigma, params, config.statistics)

    table = solve_node_table(
        config.model,
        config.potential,
        box.k_x_max,
        config.n_kx,
        config.grid_spec,
        include_negative=config.include_negative,
        adaptive=config.adaptive,
        adaptive_tol=config.adaptive_tol,
        refine_weight_fn=refine_weight,
    )
    density, flux, w_sigma = assemble_ensemble(
        table, box, params, config.statistics, config.n_sigma
    )
    quality = {
        "n_solves": table.n_solves,
        "flagged_nodes": table.flagged_count,
        "panel_error_estimate": table.panel_error_estimate,
    }
    return EnsembleResult(
        grid=table.grid,
        density=density,
        flux_sum=flux,
        current_a_m2=-CURRENT_SCALE_A_M2 * flux,
        box=box,
        fermi_energy=params.fermi_energy,
        statistics=config.statistics,
        table=table,
        sigma_weights=w_sigma,
        quality=quality,
    )


def electron_density(config: EnsembleConfig) -> tuple[np.ndarray, np.ndarray]:
    """Electron density profile (grid, n(x)) in (nm, 1/nm^3)."""
    res = run_ensemble(config)
    return res.grid, res.density


def total_current(config: EnsembleConfig) -> float:
    """Total electric current density in A/m^2 (negative for rightward flux)."""
    return run_ensemble(config).current_a_m2
