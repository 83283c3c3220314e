"""Exact finite-state references for small N.

The chain on {0,1}^(N-1) has 2^(N-1) states; states are encoded as bitmasks
with bit x-1 holding site x. Used as oracles: transient laws via the matrix
exponential, the stationary law via the generator nullspace.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm, null_space

from .params import ModelParams, enumerate_transitions
from .profiles import InitialProfile


def state_to_config(s: int, n_sites: int) -> np.ndarray:
    return np.array([(s >> i) & 1 for i in range(n_sites)], dtype=np.uint8)


def config_to_state(eta) -> int:
    return int(sum(int(v) << i for i, v in enumerate(eta)))


def generator_matrix(params: ModelParams) -> np.ndarray:
    """Dense generator Q with Q[s, s'] the rate s -> s'; rows sum to zero."""
    m = params.n_sites
    if m > 20:
        raise ValueError("generator_matrix is for small N only")
    n_states = 1 << m
    Q = np.zeros((n_states, n_states))
    for s in range(n_states):
        eta = state_to_config(s, m)
        for rate, eta2 in enumerate_transitions(eta, params):
            Q[s, config_to_state(eta2)] += rate
    np.fill_diagonal(Q, Q.diagonal() - Q.sum(axis=1))
    return Q


def product_distribution(profile: InitialProfile, params: ModelParams) -> np.ndarray:
    """Product measure fitting the profile, as a vector over states."""
    m = params.n_sites
    pr = profile.site_values(params.N)
    p = np.ones(1 << m)
    for s in range(1 << m):
        for i in range(m):
            p[s] *= pr[i] if (s >> i) & 1 else 1.0 - pr[i]
    return p


def transient_distribution(p0: np.ndarray, Q: np.ndarray, t: float) -> np.ndarray:
    return p0 @ expm(Q * t)


def stationary_distribution(Q: np.ndarray) -> np.ndarray:
    """Unique probability vector with pi Q = 0 (the chain is irreducible)."""
    ns = null_space(Q.T)
    if ns.shape[1] != 1:
        raise RuntimeError(f"generator nullspace has dimension {ns.shape[1]}, expected 1")
    pi = ns[:, 0]
    pi = pi / pi.sum()
    if pi.min() < -1e-12:
        raise RuntimeError("stationary vector has negative entries")
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def site_means(p: np.ndarray, n_sites: int) -> np.ndarray:
    out = np.zeros(n_sites)
    for s, w in enumerate(p):
        for i in range(n_sites):
            if (s >> i) & 1:
                out[i] += w
    return out


def pair_covariances(p: np.ndarray, n_sites: int) -> np.ndarray:
    """Upper-triangular (i < j) covariance matrix entries, full matrix form."""
    mean = site_means(p, n_sites)
    ee = np.zeros((n_sites, n_sites))
    for s, w in enumerate(p):
        bits = [(s >> i) & 1 for i in range(n_sites)]
        for i in range(n_sites):
            if bits[i]:
                for j in range(i + 1, n_sites):
                    if bits[j]:
                        ee[i, j] += w
    return ee - np.outer(mean, mean)


def empirical_state_law(configs: np.ndarray) -> np.ndarray:
    """Empirical distribution over bitmask states from a config matrix."""
    m = configs.shape[1]
    weights = (1 << np.arange(m)).astype(np.int64)
    states = configs.astype(np.int64) @ weights
    return np.bincount(states, minlength=1 << m) / configs.shape[0]


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())
