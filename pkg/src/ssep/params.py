"""Model core: parameters, configurations, jump rates, single transitions.

The lattice is ``{1, ..., N-1}``. A configuration is a ``uint8`` vector of
length ``N-1`` whose entry ``x-1`` holds the occupancy of site ``x`` (0 or 1).

Dynamics, in macroscopic time units:

* bulk: every bond ``(x, x+1)``, ``1 <= x <= N-2``, exchanges its endpoints
  at rate ``N^2``;
* left boundary, all scaled by ``N^(2-theta)``: site 1 is refreshed to a
  Bernoulli(rho_bar) value at rate ``r`` (split into fill ``r*rho_bar`` and
  empty ``r*(1-rho_bar)``), site 2 copies site 1 at rate ``c``, and site 2 is
  filled at rate ``b`` when site 1 is occupied;
* right boundary: mirrored at sites ``N-1``, ``N-2`` with primed constants.

The boundary mechanism is non-reversible; the macroscopic boundary densities
``alpha``, ``alpha_prime`` are the roots in [0, 1] of
``r*(rho_bar - a) + b*a*(1 - a) = 0`` (and the primed copy).
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

Configuration = np.ndarray

#: keys of the native parametrization accepted by :func:`ModelParams.from_dict`
NATIVE_KEYS = ("r", "rho_bar", "b", "c", "r_prime", "rho_bar_prime", "b_prime", "c_prime")
#: alternative flip-rate parametrization (two rates per transition kind)
FLIP_KEYS = ("alpha_1", "gamma_1", "alpha_2", "gamma_2", "beta_1", "delta_1", "beta_2", "delta_2")


def alpha_from_params(r: float, b: float, rho_bar: float) -> float:
    """Boundary density pinned by a reservoir of density ``rho_bar`` (rate
    ``r``) competing with a fill mechanism of rate ``b``.

    Returns the unique root in [0, 1] of ``r*(rho_bar - a) + b*a*(1-a) = 0``.
    For ``b == 0`` the equation degenerates and the root is ``rho_bar``.
    """
    if not 0.0 <= rho_bar <= 1.0:
        raise ValueError(f"rho_bar must lie in [0, 1], got {rho_bar}")
    if r <= 0.0:
        raise ValueError(f"r must be positive, got {r}")
    if b < 0.0:
        raise ValueError(f"b must be non-negative, got {b}")
    if b == 0.0:
        return rho_bar
    # Positive root of b*a^2 + (r-b)*a - r*rho_bar = 0; the branch below
    # avoids cancellation so the residual stays at machine precision even
    # for b << r.
    q = r - b
    disc = math.sqrt(q * q + 4.0 * b * r * rho_bar)
    if q > 0.0:
        return 2.0 * r * rho_bar / (q + disc)
    return (disc - q) / (2.0 * b)


@dataclass(frozen=True)
class ModelParams:
    """All model constants plus derived quantities.

    Immutable value object; safe to share freely.
    """

    N: int
    theta: float
    r: float
    rho_bar: float
    b: float
    c: float
    r_prime: float
    rho_bar_prime: float
    b_prime: float
    c_prime: float

    def __post_init__(self):
        if self.N < 5:
            raise ValueError(f"N must be >= 5, got {self.N}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        for name in ("r", "r_prime"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        for name in ("b", "c", "b_prime", "c_prime"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be non-negative and finite, got {v}")
        for name in ("rho_bar", "rho_bar_prime"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    # -- derived quantities -------------------------------------------------

    @property
    def n_sites(self) -> int:
        return self.N - 1

    @property
    def theta_hat(self) -> float:
        """Time-threshold exponent ``(1 - theta) / 2``."""
        return (1.0 - self.theta) / 2.0

    @property
    def bulk_scale(self) -> float:
        return float(self.N) ** 2

    @property
    def boundary_scale(self) -> float:
        return float(self.N) ** (2.0 - self.theta)

    @property
    def h1_holds(self) -> bool:
        """Subcriticality of the dual branching process: b < r on both sides."""
        return self.b < self.r and self.b_prime < self.r_prime

    @property
    def alpha(self) -> float:
        return alpha_from_params(self.r, self.b, self.rho_bar)

    @property
    def alpha_prime(self) -> float:
        return alpha_from_params(self.r_prime, self.b_prime, self.rho_bar_prime)

    # -- constructors -------------------------------------------------------

    @classmethod
    def mirrored(cls, N, theta, r, rho_bar, b, c, rho_bar_prime=None) -> "ModelParams":
        """Same rate constants on both sides, optionally with a different
        right reservoir density."""
        if rho_bar_prime is None:
            rho_bar_prime = rho_bar
        return cls(N=N, theta=theta, r=r, rho_bar=rho_bar, b=b, c=c,
                   r_prime=r, rho_bar_prime=rho_bar_prime, b_prime=b, c_prime=c)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        """Build from a plain dict in either parametrization.

        Native keys: r, rho_bar, b, c and primed versions. Flip-rate keys:
        alpha_1 = r*rho_bar, gamma_1 = r*(1-rho_bar), alpha_2 = b+c,
        gamma_2 = c (left side; beta/delta mirrored on the right). The
        flip-rate form requires alpha_2 >= gamma_2 and beta_2 >= delta_2.
        """
        if "N" not in d or "theta" not in d:
            raise ValueError("parameter dict must contain N and theta")
        if any(k in d for k in FLIP_KEYS):
            missing = [k for k in FLIP_KEYS if k not in d]
            if missing:
                raise ValueError(f"flip-rate parametrization missing keys: {missing}")
            a1, g1 = float(d["alpha_1"]), float(d["gamma_1"])
            a2, g2 = float(d["alpha_2"]), float(d["gamma_2"])
            b1, d1 = float(d["beta_1"]), float(d["delta_1"])
            b2, d2 = float(d["beta_2"]), float(d["delta_2"])
            if a2 < g2 or b2 < d2:
                raise ValueError(
                    "flip-rate parametrization requires alpha_2 >= gamma_2 and "
                    "beta_2 >= delta_2 (fill rate must dominate the copy rate)")
            if a1 + g1 <= 0 or b1 + d1 <= 0:
                raise ValueError("reservoir rates alpha_1+gamma_1 and beta_1+delta_1 must be positive")
            return cls(N=int(d["N"]), theta=float(d["theta"]),
                       r=a1 + g1, rho_bar=a1 / (a1 + g1), b=a2 - g2, c=g2,
                       r_prime=b1 + d1, rho_bar_prime=b1 / (b1 + d1),
                       b_prime=b2 - d2, c_prime=d2)
        kwargs = {"N": int(d["N"]), "theta": float(d["theta"])}
        for k in NATIVE_KEYS:
            if k not in d:
                raise ValueError(f"parameter dict missing key {k!r}")
            kwargs[k] = float(d[k])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_params(path_or_dict, warn_stream=None) -> ModelParams:
    """Load parameters from a JSON file path or a dict; emits a warning line
    to stderr when the subcriticality condition b < r (both sides) fails."""
    if isinstance(path_or_dict, dict):
        d = path_or_dict
    else:
        with open(path_or_dict) as fh:
            d = json.load(fh)
    p = ModelParams.from_dict(d)
    if not p.h1_holds:
        stream = warn_stream if warn_stream is not None else sys.stderr
        print(f"warning: fill rate >= reservoir rate (b={p.b}, r={p.r}, "
              f"b'={p.b_prime}, r'={p.r_prime}); the dual branching process "
              "need not die out", file=stream)
    return p


@dataclass(frozen=True)
class BoundaryDensities:
    alpha: float
    alpha_prime: float


def boundary_densities(params: ModelParams) -> BoundaryDensities:
    return BoundaryDensities(params.alpha, params.alpha_prime)


@dataclass(frozen=True)
class BoundaryRates:
    """Un-scaled boundary flip rates of a configuration (the ``N^(2-theta)``
    factor is applied by the simulators)."""

    c_l1: float
    c_l2: float
    c_r1: float
    c_r2: float

    @property
    def total(self) -> float:
        return self.c_l1 + self.c_l2 + self.c_r1 + self.c_r2


def new_configuration(params: ModelParams, fill: int = 0) -> Configuration:
    return np.full(params.n_sites, fill, dtype=np.uint8)


def validate_configuration(eta: Configuration, params: ModelParams) -> None:
    if eta.shape != (params.n_sites,):
        raise ValueError(f"configuration must have length {params.n_sites}, got {eta.shape}")
    if not np.all((eta == 0) | (eta == 1)):
        raise ValueError("configuration entries must be 0 or 1")


def boundary_rates(eta: Configuration, params: ModelParams) -> BoundaryRates:
    """The four boundary flip rates for the current configuration."""
    validate_configuration(eta, params)
    e1 = int(eta[0])
    e2 = int(eta[1])
    eR = int(eta[params.N - 2])      # site N-1
    eRm = int(eta[params.N - 3])     # site N-2
    c_l1 = params.r * (params.rho_bar * (1 - e1) + (1 - params.rho_bar) * e1)
    c_l2 = params.c * (e1 * (1 - e2) + (1 - e1) * e2) + params.b * e1 * (1 - e2)
    c_r1 = params.r_prime * (params.rho_bar_prime * (1 - eR) + (1 - params.rho_bar_prime) * eR)
    c_r2 = params.c_prime * (eR * (1 - eRm) + (1 - eR) * eRm) + params.b_prime * eR * (1 - eRm)
    return BoundaryRates(c_l1, c_l2, c_r1, c_r2)


FLIP_SITES = lambda N: (1, 2, N - 2, N - 1)  # noqa: E731


def apply_transition(eta: Configuration, move: tuple) -> Configuration:
    """Apply a single transition and return the new configuration.

    ``move`` is ``("exchange", x)`` with ``1 <= x <= N-2`` (swap sites x and
    x+1) or ``("flip", x)`` with x one of sites 1, 2, N-2, N-1 (complement
    site x). The input array is never modified.
    """
    kind, x = move
    N = len(eta) + 1
    out = eta.copy()
    if kind == "exchange":
        if not 1 <= x <= N - 2:
            raise IndexError(f"exchange bond x must satisfy 1 <= x <= {N - 2}, got {x}")
        out[x - 1], out[x] = eta[x], eta[x - 1]
    elif kind == "flip":
        if x not in FLIP_SITES(N):
            raise IndexError(f"flip site must be one of {FLIP_SITES(N)}, got {x}")
        out[x - 1] = 1 - eta[x - 1]
    else:
        raise ValueError(f"unknown transition kind {kind!r}")
    return out


def count_active_bonds(eta: Configuration) -> int:
    return int(np.count_nonzero(eta[:-1] != eta[1:]))


def total_jump_rate(eta: Configuration, params: ModelParams,
                    count_noop_exchanges: bool = False) -> float:
    """Total jump rate out of ``eta``.

    Bulk bonds contribute ``N^2`` each; by default only active bonds (with
    unequal endpoint values) are counted, matching the event-driven engine.
    With ``count_noop_exchanges`` every one of the N-2 bond clocks is
    counted, matching the mark-replay engine where equal-value exchanges are
    applied as no-ops. Boundary rates are scaled by ``N^(2-theta)``.
    """
    n_bonds = params.N - 2 if count_noop_exchanges else count_active_bonds(eta)
    return params.bulk_scale * n_bonds + params.boundary_scale * boundary_rates(eta, params).total


def enumerate_transitions(eta: Configuration, params: ModelParams) -> list:
    """All transitions out of ``eta`` with positive rate, as
    ``(rate, new_configuration)`` pairs. Brute-force; for small N."""
    out = []
    N = params.N
    for x in range(1, N - 1):
        if eta[x - 1] != eta[x]:
            out.append((params.bulk_scale, apply_transition(eta, ("exchange", x))))
    br = boundary_rates(eta, params)
    for rate, site in ((br.c_l1, 1), (br.c_l2, 2), (br.c_r1, N - 1), (br.c_r2, N - 2)):
        if rate > 0.0:
            out.append((params.boundary_scale * rate, apply_transition(eta, ("flip", site))))
    return out
