import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssep.params import (ModelParams, alpha_from_params, apply_transition,
                         boundary_rates, enumerate_transitions, load_params,
                         total_jump_rate)


def alpha_bisection(r, b, rho_bar, tol=1e-14):
    """Independent root finder for r*(rho-a) + b*a*(1-a) = 0 on [0, 1]."""
    f = lambda a: r * (rho_bar - a) + b * a * (1.0 - a)
    lo, hi = 0.0, 1.0
    if f(lo) <= 0.0:
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def test_alpha_degenerate_b_zero():
    assert alpha_from_params(1.0, 0.0, 0.3) == 0.3


def test_alpha_full_density_exact():
    assert alpha_from_params(1.0, 0.5, 1.0) == 1.0


def test_alpha_residual_and_bisection():
    a = alpha_from_params(1.0, 0.5, 0.5)
    assert abs(1.0 * (0.5 - a) + 0.5 * a * (1.0 - a)) < 1e-12
    assert abs(a - alpha_bisection(1.0, 0.5, 0.5)) < 1e-10


def test_alpha_random_draws_residual():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        r = rng.uniform(0.05, 10.0)
        b = rng.uniform(0.0, r * 0.999)
        rho = rng.uniform(0.0, 1.0)
        a = alpha_from_params(r, b, rho)
        assert 0.0 <= a <= 1.0
        assert abs(r * (rho - a) + b * a * (1.0 - a)) < 1e-12


def test_alpha_monotone_in_rho():
    grid = np.linspace(0.0, 1.0, 41)
    vals = [alpha_from_params(1.3, 0.7, rho) for rho in grid]
    assert all(v2 >= v1 - 1e-15 for v1, v2 in zip(vals, vals[1:]))


def test_alpha_domain_errors():
    with pytest.raises(ValueError):
        alpha_from_params(0.0, 0.1, 0.5)
    with pytest.raises(ValueError):
        alpha_from_params(1.0, 0.1, 1.5)
    with pytest.raises(ValueError):
        alpha_from_params(1.0, -0.1, 0.5)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams.mirrored(N=4, theta=0.5, r=1, rho_bar=0.5, b=0, c=0)
    with pytest.raises(ValueError):
        ModelParams.mirrored(N=10, theta=1.2, r=1, rho_bar=0.5, b=0, c=0)
    with pytest.raises(ValueError):
        ModelParams.mirrored(N=10, theta=0.5, r=-1, rho_bar=0.5, b=0, c=0)


def test_theta_hat_and_h1(params_n6):
    assert params_n6.theta_hat == 0.25
    assert params_n6.h1_holds
    p = ModelParams.mirrored(N=10, theta=0.5, r=1.0, rho_bar=0.5, b=2.0, c=0.1)
    assert not p.h1_holds


def test_h1_warning_on_load():
    buf = io.StringIO()
    d = dict(N=10, theta=0.5, r=1.0, rho_bar=0.5, b=2.0, c=0.1,
             r_prime=1.0, rho_bar_prime=0.5, b_prime=0.0, c_prime=0.0)
    load_params(d, warn_stream=buf)
    assert "dual branching process" in buf.getvalue()
    buf2 = io.StringIO()
    d["b"] = 0.5
    load_params(d, warn_stream=buf2)
    assert buf2.getvalue() == ""


def test_flip_rate_parametrization_round_trip(params_n6):
    p = params_n6
    d = {"N": p.N, "theta": p.theta,
         "alpha_1": p.r * p.rho_bar, "gamma_1": p.r * (1 - p.rho_bar),
         "alpha_2": p.b + p.c, "gamma_2": p.c,
         "beta_1": p.r_prime * p.rho_bar_prime,
         "delta_1": p.r_prime * (1 - p.rho_bar_prime),
         "beta_2": p.b_prime + p.c_prime, "delta_2": p.c_prime}
    q = ModelParams.from_dict(d)
    for name in ("r", "rho_bar", "b", "c", "r_prime", "rho_bar_prime", "b_prime", "c_prime"):
        assert getattr(q, name) == pytest.approx(getattr(p, name), abs=1e-12)
    d["alpha_2"] = 0.1
    d["gamma_2"] = 0.4
    with pytest.raises(ValueError):
        ModelParams.from_dict(d)


def test_boundary_rates_examples(params_n6):
    p = params_n6
    eta = np.zeros(p.n_sites, dtype=np.uint8)
    br = boundary_rates(eta, p)
    assert br.c_l1 == pytest.approx(p.r * p.rho_bar)
    assert br.c_l2 == 0.0
    eta[0] = 1
    br = boundary_rates(eta, p)
    assert br.c_l2 == pytest.approx(p.c + p.b)
    eta[0], eta[1] = 0, 1
    br = boundary_rates(eta, p)
    assert br.c_l2 == pytest.approx(p.c)


def test_apply_transition_examples(params_n6):
    eta = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
    out = apply_transition(eta, ("exchange", 1))
    assert list(out[:2]) == [0, 1]
    assert list(eta[:2]) == [1, 0]  # input untouched
    out = apply_transition(eta, ("flip", 1))
    assert out[0] == 0
    same = apply_transition(eta, ("exchange", 3))  # equal values: identity
    assert np.array_equal(same, eta)
    with pytest.raises(IndexError):
        apply_transition(eta, ("exchange", 5))
    with pytest.raises(IndexError):
        apply_transition(eta, ("flip", 3))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=5, max_size=5),
       st.sampled_from([("exchange", 1), ("exchange", 2), ("exchange", 4),
                        ("flip", 1), ("flip", 2), ("flip", 4), ("flip", 5)]))
def test_apply_transition_involution(bits, move):
    eta = np.array(bits, dtype=np.uint8)
    twice = apply_transition(apply_transition(eta, move), move)
    assert np.array_equal(twice, eta)


def _brute_force_rates(eta, p):
    """All positive-rate transitions read off the generator term by term,
    written independently of the library's rate helpers."""
    N = p.N
    out = []
    for x in range(1, N - 1):
        if eta[x - 1] != eta[x]:
            e2 = eta.copy()
            e2[x - 1], e2[x] = eta[x], eta[x - 1]
            out.append((p.bulk_scale, e2))
    e1, e2v = int(eta[0]), int(eta[1])
    eR, eRm = int(eta[N - 2]), int(eta[N - 3])
    raw = [
        (p.r * (p.rho_bar * (1 - e1) + (1 - p.rho_bar) * e1), 1),
        (p.c * (e1 * (1 - e2v) + (1 - e1) * e2v) + p.b * e1 * (1 - e2v), 2),
        (p.r_prime * (p.rho_bar_prime * (1 - eR) + (1 - p.rho_bar_prime) * eR), N - 1),
        (p.c_prime * (eR * (1 - eRm) + (1 - eR) * eRm) + p.b_prime * eR * (1 - eRm), N - 2),
    ]
    for rate, site in raw:
        if rate > 0:
            e3 = eta.copy()
            e3[site - 1] = 1 - e3[site - 1]
            out.append((p.boundary_scale * rate, e3))
    return out


def test_total_rate_trivial_cases(params_n6):
    p = ModelParams.mirrored(N=6, theta=0.5, r=1.0, rho_bar=0.2, b=0.0, c=0.0,
                             rho_bar_prime=0.9)
    empty = np.zeros(p.n_sites, dtype=np.uint8)
    expect = p.boundary_scale * (p.r * p.rho_bar + p.r_prime * p.rho_bar_prime)
    assert total_jump_rate(empty, p) == pytest.approx(expect)
    full = np.ones(p.n_sites, dtype=np.uint8)
    expect = p.boundary_scale * (p.r * (1 - p.rho_bar) + p.r_prime * (1 - p.rho_bar_prime))
    assert total_jump_rate(full, p) == pytest.approx(expect)


def test_total_rate_matches_brute_force(params_n6, rng):
    p = params_n6
    for _ in range(50):
        eta = (rng.random(p.n_sites) < rng.random()).astype(np.uint8)
        oracle = _brute_force_rates(eta, p)
        assert total_jump_rate(eta, p) == pytest.approx(sum(r for r, _ in oracle))
        mine = enumerate_transitions(eta, p)
        assert len(mine) == len(oracle)
        key = lambda pair: (round(pair[0], 9), pair[1].tobytes())
        assert sorted(map(key, mine)) == sorted(map(key, oracle))


def test_total_rate_all_clocks(params_n6):
    p = params_n6
    eta = np.array([1, 1, 1, 1, 1], dtype=np.uint8)
    active = total_jump_rate(eta, p)
    clocks = total_jump_rate(eta, p, count_noop_exchanges=True)
    assert clocks == pytest.approx(active + p.bulk_scale * (p.N - 2))
