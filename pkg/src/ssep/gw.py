"""Limiting tree law at a boundary: excursion outcome probabilities, the
labeled random tree they generate, and the fixed point that pins the
macroscopic boundary density.

A flag at the inner boundary site, conditioned on meeting a boundary event
before escaping to the bulk, meets a fill/empty event with probability
p_plus/p_minus and a branch event with probability p_branch. Growing a tree
where every open leaf independently branches (two open children) with
probability p_branch and otherwise closes with a sign gives the limit law of
the determination tree; solving those trees and averaging the + indicator
recovers the boundary density alpha as the unique fixed point of
  a = p_plus + p_branch*a + p_branch*(1-a)*a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dual import (DeterminationTree, FAILED, TreeNode, sample_dual_runs,
                   solve_tree, tree_from_events)
from .params import ModelParams, alpha_from_params


class _Overflow:
    def __repr__(self):
        return "OVERFLOW"


OVERFLOW = _Overflow()


@dataclass(frozen=True)
class OutcomeProbs:
    p_plus: float
    p_minus: float
    p_branch: float

    def __post_init__(self):
        for name in ("p_plus", "p_minus", "p_branch"):
            v = getattr(self, name)
            if v < 0.0:
                raise ValueError(f"{name} must be non-negative, got {v}")
        if abs(self.p_plus + self.p_minus + self.p_branch - 1.0) > 1e-12:
            raise ValueError("outcome probabilities must sum to 1")


def outcome_probs(params: ModelParams, side: str = "left", mode: str = "finite_N") -> OutcomeProbs:
    """First-boundary-event type probabilities for a flag excursion.

    mode="finite_N": exact at scale N. Per excursion leg the flag meets a
    branch event with probability b/(b+c+N^theta), moves to the outer site
    with probability (c+N^theta)/(b+c+N^theta), and there dies with
    probability r*rho/(r+N^theta) (sign split by the reservoir density);
    conditioning on some boundary event before escape normalizes the three
    outcomes by their sum. mode="limit": N -> infinity values
    (r*rho/(r+b), r*(1-rho)/(r+b), b/(r+b)).
    """
    if side == "left":
        r, rho, b, c = params.r, params.rho_bar, params.b, params.c
    elif side == "right":
        r, rho, b, c = params.r_prime, params.rho_bar_prime, params.b_prime, params.c_prime
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if mode == "limit":
        tot = r + b
        return OutcomeProbs(r * rho / tot, r * (1.0 - rho) / tot, b / tot)
    if mode != "finite_N":
        raise ValueError(f"mode must be 'finite_N' or 'limit', got {mode!r}")
    nth = float(params.N) ** params.theta
    p1_plus = (c + nth) * r * rho / ((b + c + nth) * (r + nth))
    p1_minus = (c + nth) * r * (1.0 - rho) / ((b + c + nth) * (r + nth))
    p2 = b / (b + c + nth)
    denom = p1_plus + p1_minus + p2
    return OutcomeProbs(p1_plus / denom, p1_minus / denom, p2 / denom)


def sample_gw_tree(probs: OutcomeProbs, seed: int, max_nodes: int = 100_000):
    """One labeled random tree: starting from an open root, every open leaf
    independently receives two open children with probability p_branch or a
    single signed child (+ with probability p_plus, - with p_minus).
    Returns OVERFLOW if the tree exceeds max_nodes (possible only when the
    branching is not subcritical)."""
    rng = np.random.default_rng(seed) if isinstance(seed, int) else seed
    root = TreeNode(1)
    open_leaves = [root]
    next_label = 2
    n_nodes = 1
    while open_leaves:
        node = open_leaves.pop()
        u = rng.random()
        if u < probs.p_branch:
            c1 = TreeNode(node.label)
            c2 = TreeNode(next_label)
            next_label += 1
            node.children.extend((c1, c2))
            open_leaves.extend((c2, c1))
            n_nodes += 2
        else:
            sign = "+" if u < probs.p_branch + probs.p_plus else "-"
            node.children.append(TreeNode(sign))
            n_nodes += 1
        if n_nodes > max_nodes:
            return OVERFLOW
    return DeterminationTree(root)


def estimate_alpha_gw(params: ModelParams, n_samples: int, seed: int,
                      mode: str = "limit", side: str = "left",
                      max_nodes: int = 100_000):
    """Monte Carlo mean of the + indicator of solved random trees.

    Tree sampling and solving are fused in a compiled kernel (explicit-stack
    sample + solve; distribution identical to sample_gw_tree + solve_tree,
    which the test suite checks). Returns (alpha_hat, stderr). Raises if the
    overflow rate exceeds 0.1%.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    probs = outcome_probs(params, side=side, mode=mode)
    n_plus, n_minus, n_over = _kernels.gw_solve_batch(
        probs.p_plus, probs.p_branch, n_samples, max_nodes, seed, 0)
    if n_over > 0.001 * n_samples:
        raise RuntimeError(
            f"tree overflow rate {n_over / n_samples:.2%} exceeds 0.1% "
            f"(p_branch={probs.p_branch:.4f}; subcriticality needs p_branch < 1/2)")
    n_ok = n_plus + n_minus
    alpha_hat = n_plus / n_ok
    stderr = math.sqrt(max(alpha_hat * (1.0 - alpha_hat), 1e-300) / n_ok)
    return alpha_hat, stderr


def fixed_point_residual(params: ModelParams, alpha_hat: float, side: str = "left") -> float:
    """|r*(rho - a) + b*a*(1-a)| at the estimate; zero at the exact root."""
    if side == "left":
        r, rho, b = params.r, params.rho_bar, params.b
    else:
        r, rho, b = params.r_prime, params.rho_bar_prime, params.b_prime
    return abs(r * (rho - alpha_hat) + b * alpha_hat * (1.0 - alpha_hat))


def compare_tree_laws(params: ModelParams, t: float, n_samples: int, seed: int,
                      max_size: int = 40, x: int = 3) -> dict:
    """Empirical frequencies of serialized trees (shape and leaf signs) with
    at most max_size vertices, under (a) determination trees from dual runs
    started at {x} with horizon t and (b) the random-tree law with
    finite-N outcome probabilities; reports per-tree differences and the
    total variation over the truncated support.

    Horizon-surviving and copy-merge dual runs cannot be closed into valid
    trees here and are counted as censored (they are rare for
    t >> N^(-(1-theta)/2)).
    """
    if t < params.N ** (-params.theta_hat):
        raise ValueError("t below the boundary relaxation scale N^(-(1-theta)/2)")
    batch = sample_dual_runs(x, params, t, n_samples, seed)
    dual_counts: dict = {}
    censored = 0
    big = 0
    n_dual = 0
    for i in range(batch.n_runs):
        if batch.truncated[i] or batch.hit_horizon[i]:
            censored += 1
            continue
        tree = tree_from_events(batch.events_of(i))
        if tree is FAILED or tree is None:
            censored += 1
            continue
        n_dual += 1
        if tree.size() > max_size:
            big += 1
            continue
        key = tree.serialize()
        dual_counts[key] = dual_counts.get(key, 0) + 1

    probs = outcome_probs(params, side="left" if x <= params.N // 2 else "right",
                          mode="finite_N")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    gw_counts: dict = {}
    gw_big = 0
    for _ in range(n_samples):
        tree = sample_gw_tree(probs, rng)
        if tree is OVERFLOW or tree.size() > max_size:
            gw_big += 1
            continue
        key = tree.serialize()
        gw_counts[key] = gw_counts.get(key, 0) + 1

    keys = sorted(set(dual_counts) | set(gw_counts))
    rows = []
    tv = 0.0
    for key in keys:
        pd = dual_counts.get(key, 0) / max(n_dual, 1)
        pg = gw_counts.get(key, 0) / n_samples
        rows.append({"tree": key, "p_dual": pd, "p_gw": pg, "diff": abs(pd - pg)})
        tv += abs(pd - pg)
    tv += abs(big / max(n_dual, 1) - gw_big / n_samples)
    rows.sort(key=lambda r: -max(r["p_dual"], r["p_gw"]))
    return {
        "x": x, "t": t, "n_samples": n_samples, "max_size": max_size,
        "n_dual_trees": n_dual, "censored_dual": censored,
        "big_dual": big, "big_gw": gw_big,
        "tv": 0.5 * tv, "trees": rows,
        "outcome_probs": {"p_plus": probs.p_plus, "p_minus": probs.p_minus,
                          "p_branch": probs.p_branch},
    }


def mean_branch_events(p_branch: float) -> float:
    """Expected number of branch events of the random tree (subcritical
    geometric-offspring identity p_b/(1-2*p_b))."""
    if p_branch >= 0.5:
        raise ValueError("mean is finite only for p_branch < 1/2")
    return p_branch / (1.0 - 2.0 * p_branch)


def limit_alpha(params: ModelParams, side: str = "left") -> float:
    if side == "left":
        return alpha_from_params(params.r, params.b, params.rho_bar)
    return alpha_from_params(params.r_prime, params.b_prime, params.rho_bar_prime)
