"""Forward simulation of the occupation process and Monte Carlo estimators
for the density and two-point correlation fields.

Two interchangeable engines:

* :func:`run_gillespie` draws waiting times from the total jump rate and
  picks transitions proportionally (active bonds only, O(1) per event);
* :func:`run_graphical` replays a :class:`~ssep.marks.MarkStream`, applying
  every mark in time order (equal-value exchanges are no-ops).

Both sample the same law; the replay engine is deterministic given the
stream, which is what the dual-process machinery needs.

Estimators accumulate (count, sum, sum of squares) triples, so partial
results merge associatively; replica r of a run with master seed s draws
from an independent stream keyed by (s, r) regardless of chunking.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels, marks
from .params import Configuration, ModelParams, validate_configuration
from .profiles import InitialProfile


@dataclass
class DensityField:
    """Per-site empirical occupation means with standard errors."""

    t: float
    sites: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int


@dataclass
class CorrelationField:
    """Empirical covariances for site pairs x < y (upper-triangular set)."""

    t: float
    pairs: np.ndarray     # (k, 2) site labels
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int


def sample_initial(profile: InitialProfile, params: ModelParams, seed: int) -> Configuration:
    """Independent Bernoulli(f0(x/N)) draw per site."""
    eta = np.empty(params.n_sites, dtype=np.uint8)
    _kernels.bernoulli_fill(eta, profile.site_values(params.N), _kernels.rng_init(seed, 0))
    return eta


def run_gillespie(eta0: Configuration, params: ModelParams, t_end: float, seed: int) -> Configuration:
    """One sample of the configuration at time t_end started from eta0."""
    validate_configuration(eta0, params)
    if t_end < 0.0:
        raise ValueError("t_end must be >= 0")
    eta = eta0.copy()
    N = params.N
    _kernels.gillespie_run(
        eta, N, params.theta, params.r, params.rho_bar, params.b, params.c,
        params.r_prime, params.rho_bar_prime, params.b_prime, params.c_prime,
        t_end, _kernels.rng_init(seed, 0),
        np.empty(1), t_end + 1.0,
        np.empty(N - 2, np.int64), np.empty(N - 2, np.int64), np.empty(N - 1))
    return eta


def run_graphical(eta0: Configuration, stream: marks.MarkStream, t_end: float) -> Configuration:
    """Deterministic replay of the mark stream on eta0 up to time t_end."""
    if t_end > stream.horizon:
        raise ValueError(f"t_end={t_end} exceeds stream horizon {stream.horizon}")
    eta = eta0.copy()
    _kernels.graphical_run(eta, stream.times, stream.kinds, stream.positions,
                           0, len(stream.times), 0.0, t_end)
    return eta


# -- replica batches --------------------------------------------------------

def _final_configs_chunk(args):
    params_dict, profile_dict, t, seed, i0, n = args
    p = ModelParams.from_dict(params_dict)
    profile = InitialProfile.from_dict(profile_dict)
    out = np.empty((n, p.n_sites), dtype=np.uint8)
    _kernels.gillespie_final_batch(
        p.N, p.theta, p.r, p.rho_bar, p.b, p.c,
        p.r_prime, p.rho_bar_prime, p.b_prime, p.c_prime,
        profile.site_values(p.N), t, seed, i0, out)
    return out


def final_configurations(profile: InitialProfile, params: ModelParams, t: float,
                         n_samples: int, seed: int, threads: int = 1) -> np.ndarray:
    """(n_samples, N-1) matrix of independent configurations at time t.

    Replica i is seeded by (seed + chunk start, offset), identical for any
    chunking, so the result only depends on (seed, n_samples, threads=1
    ordering). With threads > 1 chunks run in separate processes and are
    concatenated in order.
    """
    p = params
    if threads <= 1:
        out = np.empty((n_samples, p.n_sites), dtype=np.uint8)
        _kernels.gillespie_final_batch(
            p.N, p.theta, p.r, p.rho_bar, p.b, p.c,
            p.r_prime, p.rho_bar_prime, p.b_prime, p.c_prime,
            profile.site_values(p.N), t, seed, 0, out)
        return out
    # chunk boundaries reproduce the sequential per-replica seeding
    bounds = np.linspace(0, n_samples, threads + 1).astype(int)
    jobs = [(params.to_dict(), profile.to_dict(), t, seed, int(i0), int(i1 - i0))
            for i0, i1 in zip(bounds[:-1], bounds[1:]) if i1 > i0]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(_final_configs_chunk, jobs))
    return np.concatenate(parts, axis=0)


def _mean_stderr(configs: np.ndarray):
    n = configs.shape[0]
    mean = configs.mean(axis=0, dtype=np.float64)
    var = mean * (1.0 - mean)  # exact Bernoulli sample variance up to n/(n-1)
    if n > 1:
        var = var * n / (n - 1.0)
    return mean, np.sqrt(var / n)


def estimate_density(profile: InitialProfile, params: ModelParams, t: float,
                     n_samples: int, seed: int, threads: int = 1,
                     configs: np.ndarray | None = None) -> DensityField:
    """Per-site empirical mean of the occupation at time t over independent
    replicas; stderr is the binomial standard error."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if configs is None:
        configs = final_configurations(profile, params, t, n_samples, seed, threads)
    mean, err = _mean_stderr(configs)
    return DensityField(t, np.arange(1, params.N), mean, err, configs.shape[0])


def all_far_pairs(params: ModelParams, min_distance: int) -> np.ndarray:
    """All site pairs (x, y), x < y, with y - x >= min_distance."""
    out = []
    for x in range(1, params.N):
        for y in range(x + min_distance, params.N):
            out.append((x, y))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def estimate_correlation(profile: InitialProfile, params: ModelParams, t: float,
                         n_samples: int, seed: int,
                         pair_set: np.ndarray | None = None, threads: int = 1,
                         configs: np.ndarray | None = None) -> CorrelationField:
    """Empirical covariance phi(x, y) = cov(eta(x), eta(y)) per pair, with a
    plug-in standard error from the fourth-moment formula."""
    if pair_set is None:
        pair_set = all_far_pairs(params, 2)
    pair_set = np.asarray(pair_set, dtype=np.int64).reshape(-1, 2)
    if np.any(pair_set[:, 0] >= pair_set[:, 1]):
        raise ValueError("pair_set must contain pairs with x < y")
    if configs is None:
        configs = final_configurations(profile, params, t, n_samples, seed, threads)
    n = configs.shape[0]
    centered = configs.astype(np.float64)
    centered -= centered.mean(axis=0)
    # first and second moments of the per-sample products via two Gram
    # matrices; avoids materializing the (n, n_pairs) product array
    m1 = (centered.T @ centered) / n
    sq = centered * centered
    m2 = (sq.T @ sq) / n
    ix = pair_set[:, 0] - 1
    iy = pair_set[:, 1] - 1
    cov = m1[ix, iy]
    if n > 1:
        var = np.maximum(m2[ix, iy] - cov ** 2, 0.0) * n / (n - 1.0)
        err = np.sqrt(var / n)
        cov = cov * n / (n - 1.0)
    else:
        err = np.full(len(pair_set), np.nan)
    return CorrelationField(t, pair_set, cov, err, n)


def _time_average_chunk(args):
    params_dict, profile_dict, t_burn, t_end, seed, i0, n = args
    p = ModelParams.from_dict(params_dict)
    profile = InitialProfile.from_dict(profile_dict)
    acc = np.zeros((n, p.n_sites))
    _kernels.gillespie_time_average_batch(
        p.N, p.theta, p.r, p.rho_bar, p.b, p.c,
        p.r_prime, p.rho_bar_prime, p.b_prime, p.c_prime,
        profile.site_values(p.N), t_burn, t_end, seed, i0, acc)
    return acc


def time_averaged_density(profile: InitialProfile, params: ModelParams,
                          t_burn: float, t_end: float, n_traj: int, seed: int,
                          threads: int = 1) -> DensityField:
    """Exact per-trajectory time integral of the occupation over
    [t_burn, t_end], averaged over independent trajectories. The long-run
    chain is ergodic, so for t_end large this estimates the stationary
    profile."""
    if not 0.0 <= t_burn < t_end:
        raise ValueError("need 0 <= t_burn < t_end")
    if threads <= 1:
        acc = _time_average_chunk((params.to_dict(), profile.to_dict(),
                                   t_burn, t_end, seed, 0, n_traj))
    else:
        bounds = np.linspace(0, n_traj, threads + 1).astype(int)
        jobs = [(params.to_dict(), profile.to_dict(), t_burn, t_end, seed, int(i0), int(i1 - i0))
                for i0, i1 in zip(bounds[:-1], bounds[1:]) if i1 > i0]
        with ProcessPoolExecutor(max_workers=threads) as ex:
            acc = np.concatenate(list(ex.map(_time_average_chunk, jobs)), axis=0)
    per_traj = acc / (t_end - t_burn)
    mean = per_traj.mean(axis=0)
    if n_traj > 1:
        err = per_traj.std(axis=0, ddof=1) / math.sqrt(n_traj)
    else:
        err = np.full(params.n_sites, np.nan)
    return DensityField(t_end, np.arange(1, params.N), mean, err, n_traj)


def graphical_replicas(profile: InitialProfile, params: ModelParams, t: float,
                       n_samples: int, seed: int, chunk_replicas: int = 20000) -> np.ndarray:
    """Independent replicas of the replay engine.

    One long mark stream is generated per chunk and consecutive windows of
    length t are replayed (component processes have stationary independent
    increments, so the windows are i.i.d. copies of a fresh stream).
    """
    p = params
    out = np.empty((n_samples, p.n_sites), dtype=np.uint8)
    done = 0
    chunk_id = 0
    while done < n_samples:
        n_chunk = min(chunk_replicas, n_samples - done)
        stream = marks.generate(p, t * n_chunk, seed + 7_000_003 * (chunk_id + 1))
        offsets = t * np.arange(n_chunk)
        starts = np.searchsorted(stream.times, offsets, side="left")
        ends = np.empty(n_chunk, dtype=np.int64)
        ends[:-1] = starts[1:]
        ends[-1] = len(stream.times)
        _kernels.graphical_final_batch(
            p.N, profile.site_values(p.N), stream.times, stream.kinds, stream.positions,
            starts.astype(np.int64), ends, offsets, t, seed, done,
            out[done:done + n_chunk])
        done += n_chunk
        chunk_id += 1
    return out
