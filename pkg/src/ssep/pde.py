"""Deterministic references: the lattice density equation, the lattice
two-point correlation equation, the continuum Dirichlet heat equation, the
stationary profile, and a random-walk Monte Carlo check of the hitting-time
representation of the density.

The lattice density obeys d/dt rho = N^2 (rho(x+1) + rho(x-1) - 2 rho(x)) on
sites 4..N-4 with the values at sites 3 and N-3 imposed (constant alpha,
alpha' in reference mode, or supplied time traces); the three outermost
sites at each end are outside the solver's domain. The correlation field
obeys the two-dimensional analogue above the diagonal with a reflecting
stencil and a negative squared-gradient source on the diagonal pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .params import ModelParams
from .profiles import InitialProfile


def discrete_laplacian(field: np.ndarray, N: int) -> np.ndarray:
    """N^2 * (f(x+1) + f(x-1) - 2 f(x)) on the interior of the index range."""
    field = np.asarray(field, dtype=float)
    if len(field) < 3:
        raise ValueError("field must have at least 3 entries")
    return float(N) ** 2 * (field[2:] + field[:-2] - 2.0 * field[1:-1])


def stationary_profile(alpha: float, alpha_prime: float, u_grid) -> np.ndarray:
    """Linear interpolation alpha + u*(alpha' - alpha)."""
    u = np.asarray(u_grid, dtype=float)
    return alpha + u * (alpha_prime - alpha)


@dataclass
class DiscreteDensitySolution:
    """rho on sites 3..N-3 at the requested times (row per time)."""

    N: int
    sites: np.ndarray
    times: np.ndarray
    values: np.ndarray      # (n_times, N-5)
    dt: float
    boundary_mode: str

    def at_time(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > self.dt + 1e-12:
            raise ValueError(f"time {t} not on the saved mesh")
        return self.values[i]


def _steps_for(t: float, dt: float) -> int:
    return max(0, int(round(t / dt)))


def solve_discrete_density(params: ModelParams, f0: InitialProfile,
                           t_end: float, dt: float | None = None,
                           save_times=None, boundary_mode: str = "fixed",
                           traces=None) -> DiscreteDensitySolution:
    """Explicit Euler integration of the lattice density equation.

    boundary_mode="fixed" pins sites 3 and N-3 at alpha, alpha'. With
    boundary_mode="traces", ``traces`` must be a pair of arrays sampled on
    the solver's time mesh (length n_steps+1). Stability needs
    dt <= 1/(4 N^2); the default is 1/(8 N^2).
    """
    N = params.N
    if N < 8:
        raise ValueError("density solver needs N >= 8")
    if dt is None:
        dt = 1.0 / (8.0 * N * N)
    if dt > 0.25 / (N * N) + 1e-18:
        raise ValueError(f"dt={dt} violates the stability bound 1/(4 N^2)")
    sites = np.arange(3, N - 2)
    rho = f0.evaluate(sites / N).astype(float)
    work = np.empty_like(rho)
    n_total = _steps_for(t_end, dt)
    if save_times is None:
        save_times = [t_end]
    save_steps = sorted(set(_steps_for(t, dt) for t in save_times))
    if save_steps and save_steps[-1] > n_total:
        raise ValueError("save time beyond t_end")
    if boundary_mode == "fixed":
        a_l, a_r = params.alpha, params.alpha_prime
    elif boundary_mode == "traces":
        a_l_tr, a_r_tr = traces
        a_l_tr = np.asarray(a_l_tr, float)
        a_r_tr = np.asarray(a_r_tr, float)
        if len(a_l_tr) < n_total + 1 or len(a_r_tr) < n_total + 1:
            raise ValueError("boundary traces shorter than the time mesh")
    else:
        raise ValueError(f"unknown boundary mode {boundary_mode!r}")
    out_times, out_vals = [], []
    step = 0
    for target in save_steps:
        n_seg = target - step
        if boundary_mode == "fixed":
            _kernels.density_euler(rho, work, N, dt, n_seg, a_l, a_r)
        else:
            _kernels.density_euler_trace(rho, work, N, dt, n_seg, a_l_tr, a_r_tr, step)
        step = target
        out_times.append(step * dt)
        out_vals.append(rho.copy())
    return DiscreteDensitySolution(N, sites, np.array(out_times),
                                   np.array(out_vals), dt, boundary_mode)


@dataclass
class HeatSolution:
    """Sine-series solution of the continuum Dirichlet problem."""

    alpha: float
    alpha_prime: float
    coefficients: np.ndarray
    truncation_bound: float
    u_grid: np.ndarray
    values: np.ndarray


def _sine_coefficients(f0: InitialProfile, alpha: float, alpha_prime: float,
                       n_modes: int, quad_points: int = 8193) -> np.ndarray:
    u = np.linspace(0.0, 1.0, quad_points)
    w = f0.evaluate(u) - stationary_profile(alpha, alpha_prime, u)
    k = np.arange(1, n_modes + 1)
    ig = w[None, :] * np.sin(np.pi * k[:, None] * u[None, :])
    return 2.0 * np.trapezoid(ig, u, axis=1)


def heat_solution(f0: InitialProfile, alpha: float, alpha_prime: float, t: float,
                  u_grid, n_modes: int = 128) -> HeatSolution:
    """rho_t(u) = rho*(u) + sum_k c_k exp(-k^2 pi^2 t) sin(k pi u) with c_k
    the sine coefficients of f0 - rho*. The reported truncation bound adds
    the computed tail of 64 extra modes and a crude |c_k| <= 2 remainder."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if t < 0.0:
        raise ValueError("t must be >= 0")
    u = np.asarray(u_grid, dtype=float)
    extra = 64
    coef = _sine_coefficients(f0, alpha, alpha_prime, n_modes + extra)
    k = np.arange(1, n_modes + 1)
    decay = np.exp(-(k * np.pi) ** 2 * t)
    vals = stationary_profile(alpha, alpha_prime, u) + \
        (coef[:n_modes] * decay) @ np.sin(np.pi * np.outer(k, u))
    k_extra = np.arange(n_modes + 1, n_modes + extra + 1)
    bound = float(np.sum(np.abs(coef[n_modes:]) * np.exp(-(k_extra * np.pi) ** 2 * t)))
    k_rest = n_modes + extra + 1
    lam = (k_rest * np.pi) ** 2 * t
    if lam > 0:
        # sum_{k >= k_rest} 2 exp(-k^2 pi^2 t) <= 2 exp(-lam) / (1 - exp(-(2k+1) pi^2 t))
        bound += 2.0 * math.exp(-lam) / max(1.0 - math.exp(-(2 * k_rest + 1) * math.pi ** 2 * t), 1e-300)
    else:
        bound = float("inf")
    return HeatSolution(alpha, alpha_prime, coef[:n_modes], bound, u, vals)


def discrete_linear_profile(params: ModelParams) -> np.ndarray:
    """Stationary state of the lattice solver: linear through (3, alpha) and
    (N-3, alpha')."""
    sites = np.arange(3, params.N - 2)
    return params.alpha + (sites - 3) / (params.N - 6) * (params.alpha_prime - params.alpha)


# ---------------------------------------------------------------------------
# correlation field
# ---------------------------------------------------------------------------

@dataclass
class CorrelationSolution:
    """phi on the truncated above-diagonal domain, full (N, N) array indexed
    by sites; entries outside the evolved sets hold the boundary data."""

    N: int
    delta: float
    t: float
    phi: np.ndarray
    bulk_points: np.ndarray      # (nB, 2)
    diag_points: np.ndarray      # (nD,) x-values of pairs (x, x+1)
    dt: float

    def max_abs_over(self, min_distance: int) -> float:
        sel = self.bulk_points[:, 1] - self.bulk_points[:, 0] >= min_distance
        if not np.any(sel):
            return 0.0
        pts = self.bulk_points[sel]
        return float(np.max(np.abs(self.phi[pts[:, 0], pts[:, 1]])))


def correlation_domain(N: int, delta: float):
    """Evolved index sets of the correlation solver.

    Bulk points: 4 <= x <= (1-delta)N - 1, delta*N + 1 <= y <= N-4,
    y >= x+2 (the x=3 column and y=N-3 row are Dirichlet data, as are the
    two short segments closing the corners). Diagonal pairs (x, x+1) for
    delta*N <= x <= (1-delta)N.
    """
    dN = int(math.floor(delta * N + 1e-9))
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if dN < 5 or N - dN - 1 <= dN:
        raise ValueError(f"delta*N = {dN} too small for the domain layout")
    bulk = []
    for x in range(4, N - dN):          # x <= (1-delta)N - 1
        y0 = max(dN + 1, x + 2)
        for y in range(y0, N - 3):      # y <= N-4
            bulk.append((x, y))
    diag = np.arange(dN, N - dN + 1)    # x in [delta N, (1-delta) N]
    return np.array(bulk, dtype=np.int64).reshape(-1, 2), diag.astype(np.int64)


def solve_correlation_field(params: ModelParams, f0: InitialProfile, delta: float,
                            t_end: float, dt: float | None = None,
                            boundary_values: np.ndarray | None = None) -> CorrelationSolution:
    """Explicit Euler integration of the correlation equation, starting from
    phi = 0, with the density co-evolved on the same mesh (fixed-alpha
    boundary mode). Off-domain values are 0 in reference mode or taken from
    ``boundary_values`` (a full (N, N) array) when given. Stability needs
    dt <= 1/(8 N^2).
    """
    N = params.N
    if dt is None:
        dt = 1.0 / (8.0 * N * N)
    if dt > 0.125 / (N * N) + 1e-18:
        raise ValueError(f"dt={dt} violates the stability bound 1/(8 N^2)")
    bulk, diag = correlation_domain(N, delta)
    if diag[0] < 4 or diag[-1] > N - 4:
        raise ValueError("diagonal range must stay inside the density grid")
    phi = np.zeros((N, N))
    if boundary_values is not None:
        phi[:] = boundary_values
        phi[bulk[:, 0], bulk[:, 1]] = 0.0
        phi[diag, diag + 1] = 0.0
    sites = np.arange(3, N - 2)
    rho = f0.evaluate(sites / N).astype(float)
    rho_work = np.empty_like(rho)
    n_steps = _steps_for(t_end, dt)
    _kernels.corr_euler(phi, rho, rho_work, N, dt, n_steps,
                        params.alpha, params.alpha_prime,
                        bulk[:, 0].copy(), bulk[:, 1].copy(), diag,
                        np.empty(len(bulk)), np.empty(len(diag)))
    return CorrelationSolution(N, delta, n_steps * dt, phi, bulk, diag, dt)


# ---------------------------------------------------------------------------
# random-walk representation of the density
# ---------------------------------------------------------------------------

def rw_hitting_estimate(x: int, t: float, params: ModelParams, n_samples: int,
                        seed: int, f0: InitialProfile) -> dict:
    """Monte Carlo over rate-N^2-per-neighbor walks from x absorbed at sites
    3 and N-3 or stopped at time t. Returns the absorption probabilities,
    the mean initial-profile value over interior stops, and the
    reconstruction alpha*p_left + alpha'*p_right + interior contribution,
    which matches the lattice density solution at (x, t) in fixed-boundary
    mode."""
    N = params.N
    if not 3 <= x <= N - 3:
        raise ValueError(f"x must lie in 3..{N - 3}")
    f0_vals = f0.site_values(N)
    n_l, n_r, n_i, acc = _kernels.rw_hitting_batch(N, int(x), float(t),
                                                   n_samples, seed, f0_vals)
    n = float(n_samples)
    p_left, p_right, p_int = n_l / n, n_r / n, n_i / n
    mean_exit_profile = acc / n_i if n_i else 0.0
    recon = params.alpha * p_left + params.alpha_prime * p_right + acc / n
    err = math.sqrt(0.25 / n)
    return {"p_left": p_left, "p_right": p_right, "p_interior": p_int,
            "mean_exit_profile": mean_exit_profile,
            "reconstruction": recon, "stderr": err}
