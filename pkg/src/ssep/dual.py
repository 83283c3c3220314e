"""Dual flag process, determination trees, and the exact backward resolver.

To determine an occupation value eta_t(x) one tracks, backward in time, the
set of sites whose values are still needed ("flags"). Replaying the marks of
the graphical construction in reverse time order turns this into a forward
Markov process on flag sets:

* an exchange mark moves a flag across its bond (two flagged endpoints swap
  their labels);
* a fill/empty mark at a flagged outer boundary site deletes that flag (the
  value is known from the mark's sign);
* a branch mark at a flagged inner boundary site means the value there came
  from either of the two outermost sites, so a flag is spawned at the outer
  site when it is unflagged there;
* a copy mark at a flagged inner boundary site moves the flag outward; if
  both sites of that boundary were flagged, the inner flag is simply
  deleted, which the tree construction cannot represent ("failed").

Along the run a labeled rooted tree records every boundary event; solving
the tree (leaves first, a two-child vertex resolving to + when its second
child is +, to the first child's sign otherwise) recovers the occupation
value exactly. :func:`resolve_site` computes the same value by direct
memoized backward recursion over the marks and never fails, so it serves as
the exact cross-check, including on copy-merge realizations.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .marks import BRANCH, COPY, EXCHANGE, MINUS, PLUS, MarkStream
from .params import Configuration, ModelParams


class _Failed:
    """Sentinel: the tree construction hit a copy mark with both sites of one
    boundary flagged."""

    def __repr__(self):
        return "FAILED"


FAILED = _Failed()


@dataclass
class FlagSet:
    """Flagged sites with labels; at most one flag per site, labels unique."""

    flags: dict        # site -> label
    next_label: int

    @classmethod
    def from_sites(cls, sites) -> "FlagSet":
        sites = sorted(set(int(s) for s in sites))
        return cls({s: i + 1 for i, s in enumerate(sites)}, len(sites) + 1)

    def positions(self):
        return sorted(self.flags)

    def copy(self) -> "FlagSet":
        return FlagSet(dict(self.flags), self.next_label)

    def __len__(self):
        return len(self.flags)


@dataclass
class DualStats:
    kappa: int
    lifespan: float
    max_position: int
    failed: bool
    hit_horizon: bool


@dataclass
class TreeNode:
    label: object
    children: list = field(default_factory=list)

    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class DeterminationTree:
    root: TreeNode

    def vertices(self):
        stack = [self.root]
        while stack:
            v = stack.pop()
            yield v
            stack.extend(v.children)

    def size(self) -> int:
        return sum(1 for _ in self.vertices())

    def serialize(self) -> str:
        """Canonical nested-parenthesis form keeping structure and leaf signs
        (internal labels dropped); children in construction order."""
        out = []
        stack = [(self.root, False)]
        while stack:
            node, closing = stack.pop()
            if closing:
                out.append(")")
            elif node.is_leaf():
                out.append(str(node.label))
            else:
                out.append("(")
                stack.append((node, True))
                for ch in reversed(node.children):
                    stack.append((ch, False))
        return "".join(out)

    def to_dot(self) -> str:
        lines = ["digraph tree {"]
        ids = {}
        for i, v in enumerate(self.vertices()):
            ids[id(v)] = i
            lines.append(f'  n{i} [label="{v.label}"];')
        for v in self.vertices():
            for ch in v.children:
                lines.append(f"  n{ids[id(v)]} -> n{ids[id(ch)]};")
        lines.append("}")
        return "\n".join(lines)


class MalformedTreeError(ValueError):
    pass


def validate_tree(tree: DeterminationTree) -> None:
    """Check the determination-tree shape: signed leaves only, at most two
    children per vertex, and leaves exactly the only children."""
    for v in tree.vertices():
        c = len(v.children)
        if c > 2:
            raise MalformedTreeError("vertex with more than two children")
        if c == 0:
            if v.label not in ("+", "-"):
                raise MalformedTreeError(f"leaf with label {v.label!r}")
            if v is tree.root:
                raise MalformedTreeError("single-vertex tree")
        else:
            if v.label in ("+", "-"):
                raise MalformedTreeError("signed internal vertex")
        for ch in v.children:
            if ch.is_leaf() != (c == 1):
                raise MalformedTreeError("leaves must be exactly the only children")


def solve_tree(tree: DeterminationTree) -> str:
    """Root sign: bottom-up, an only child passes its sign to its parent and
    a two-child vertex gets + if the second child solved to +, otherwise the
    first child's sign. The resolution order does not matter."""
    root = tree.root if isinstance(tree, DeterminationTree) else tree
    vals = {}
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if not done:
            stack.append((node, True))
            for ch in node.children:
                stack.append((ch, False))
        else:
            if not node.children:
                if node.label not in ("+", "-"):
                    raise MalformedTreeError(f"unresolved leaf {node.label!r}")
                vals[id(node)] = node.label
            elif len(node.children) == 1:
                vals[id(node)] = vals[id(node.children[0])]
            elif len(node.children) == 2:
                v2 = vals[id(node.children[1])]
                vals[id(node)] = "+" if v2 == "+" else vals[id(node.children[0])]
            else:
                raise MalformedTreeError("vertex with more than two children")
    return vals[id(root)]


# ---------------------------------------------------------------------------
# mark-driven runs (exact, replayable)
# ---------------------------------------------------------------------------

def _boundary_sides(N):
    # inner site -> outer site per boundary
    return {2: 1, N - 2: N - 1}


def run_flag_process(A0, params: ModelParams, stream: MarkStream, t_end: float,
                     _tree=None, _eta0=None):
    """Evolve the flag set from ``A0`` along the stream's marks up to
    min(t_end, extinction). Returns (trajectory, stats) where the trajectory
    lists (time, FlagSet) snapshots at every mark that changed the set.

    The keyword-only hooks drive the tree construction; use
    :func:`build_determination_tree` instead of passing them directly.
    """
    fs = A0.copy() if isinstance(A0, FlagSet) else FlagSet.from_sites(A0)
    if len(fs) == 0:
        raise ValueError("initial flag set must be non-empty")
    N = params.N
    outer_of = _boundary_sides(N)
    rho_of = {1: params.rho_bar, N - 1: params.rho_bar_prime}
    traj = [(0.0, fs.copy())]
    kappa = len(fs)
    max_pos = max(fs.flags)
    failed = False
    stopped_at = None
    for t, kind, pos in stream:
        if t > t_end:
            break
        changed = False
        if kind == EXCHANGE:
            a, bsite = pos, pos + 1
            la = fs.flags.get(a)
            lb = fs.flags.get(bsite)
            if la is not None and lb is not None:
                fs.flags[a], fs.flags[bsite] = lb, la
                changed = True
            elif la is not None:
                del fs.flags[a]
                fs.flags[bsite] = la
                max_pos = max(max_pos, bsite)
                changed = True
            elif lb is not None:
                del fs.flags[bsite]
                fs.flags[a] = lb
                changed = True
        elif kind in (PLUS, MINUS):
            lab = fs.flags.pop(pos, None)
            if lab is not None:
                changed = True
                if _tree is not None:
                    _tree.close_label(lab, "+" if kind == PLUS else "-")
        elif kind == COPY:
            lab = fs.flags.get(pos)
            if lab is not None:
                outer = outer_of[pos]
                changed = True
                if outer in fs.flags:
                    del fs.flags[pos]
                    failed = True
                    if _tree is not None:
                        stopped_at = t
                        break
                else:
                    del fs.flags[pos]
                    fs.flags[outer] = lab
        elif kind == BRANCH:
            lab = fs.flags.get(pos)
            if lab is not None:
                outer = outer_of[pos]
                changed = True
                if outer in fs.flags:
                    k2 = fs.flags[outer]
                else:
                    k2 = fs.next_label
                    fs.flags[outer] = k2
                    fs.next_label += 1
                    kappa += 1
                if _tree is not None:
                    _tree.branch_label(lab, k2)
        if changed:
            traj.append((t, fs.copy()))
        if not fs.flags:
            stopped_at = t
            break
    if stopped_at is not None:
        lifespan = stopped_at
        hit_horizon = False
    else:
        lifespan = t_end
        hit_horizon = True
        if _tree is not None and not failed:
            if _eta0 is None:
                raise ValueError("surviving flags need an initial configuration to close the tree")
            for site, lab in sorted(fs.flags.items()):
                _tree.close_label(lab, "+" if _eta0[site - 1] == 1 else "-")
    return traj, DualStats(kappa, float(lifespan), max_pos, failed, hit_horizon)


def run_frozen_flag_process(A0, params: ModelParams, stream: MarkStream, t_end: float):
    """Flag motion only: branch and fill/empty marks are ignored, and a copy
    mark with both boundary sites flagged swaps the two flags. The flag count
    is conserved for every realization."""
    fs = A0.copy() if isinstance(A0, FlagSet) else FlagSet.from_sites(A0)
    if len(fs) == 0:
        raise ValueError("initial flag set must be non-empty")
    N = params.N
    outer_of = _boundary_sides(N)
    traj = [(0.0, fs.copy())]
    for t, kind, pos in stream:
        if t > t_end:
            break
        changed = False
        if kind == EXCHANGE:
            a, bsite = pos, pos + 1
            la = fs.flags.get(a)
            lb = fs.flags.get(bsite)
            if la is not None and lb is not None:
                fs.flags[a], fs.flags[bsite] = lb, la
                changed = True
            elif la is not None:
                del fs.flags[a]
                fs.flags[bsite] = la
                changed = True
            elif lb is not None:
                del fs.flags[bsite]
                fs.flags[a] = lb
                changed = True
        elif kind == COPY:
            lab = fs.flags.get(pos)
            if lab is not None:
                outer = outer_of[pos]
                changed = True
                if outer in fs.flags:
                    fs.flags[pos], fs.flags[outer] = fs.flags[outer], lab
                else:
                    del fs.flags[pos]
                    fs.flags[outer] = lab
        if changed:
            traj.append((t, fs.copy()))
    return traj


class _TreeBuilder:
    def __init__(self, first_label: int):
        self.root = TreeNode(first_label)
        self.leaves = {first_label: [self.root]}

    def close_label(self, label, sign):
        for leaf in self.leaves.pop(label, []):
            leaf.children.append(TreeNode(sign))

    def branch_label(self, label, second_label):
        firsts, seconds = [], []
        for leaf in self.leaves.get(label, []):
            c1 = TreeNode(label)
            c2 = TreeNode(second_label)
            leaf.children.extend((c1, c2))
            firsts.append(c1)
            seconds.append(c2)
        self.leaves[label] = firsts
        self.leaves.setdefault(second_label, []).extend(seconds)


def build_determination_tree(x: int, params: ModelParams, stream: MarkStream,
                             t_horizon: float, eta0: Configuration | None = None):
    """Run the flag process from {x} and record the boundary events as a
    labeled rooted tree.

    A fill/empty event gives every leaf carrying the dying flag's label one
    signed child; a branch event gives them two children, the first keeping
    the label and the second carrying the outer flag's label (fresh when the
    outer site was unflagged). Flags alive at the horizon close their leaves
    with the sign of ``eta0`` at the flag position. Returns
    ``(DeterminationTree | FAILED, DualStats)``; FAILED signals a copy mark
    with both sites of one boundary flagged.
    """
    if not 1 <= x <= params.N - 1:
        raise ValueError(f"site must lie in 1..{params.N - 1}, got {x}")
    builder = _TreeBuilder(1)
    _, stats = run_flag_process(FlagSet({int(x): 1}, 2), params, stream, t_horizon,
                                _tree=builder, _eta0=eta0)
    if stats.failed:
        return FAILED, stats
    return DeterminationTree(builder.root), stats


def dual_statistics(x: int, params: ModelParams, stream: MarkStream,
                    t_horizon: float) -> DualStats:
    """Stats of one flag-process run started from {x}."""
    _, stats = run_flag_process(FlagSet({int(x): 1}, 2), params, stream, t_horizon)
    return stats


# ---------------------------------------------------------------------------
# exact backward resolver
# ---------------------------------------------------------------------------

def resolve_site(x: int, t: float, eta0: Configuration, stream: MarkStream) -> int:
    """Occupation value at site x at time t, by memoized backward recursion
    over the marks: an exchange redirects the query across the bond, a
    fill/empty mark answers directly, a copy mark forwards to the outer
    site, and a branch mark takes the OR of the two boundary sites just
    before the mark. Reaching time 0 reads eta0. Always terminates and
    always equals the forward replay."""
    if t > stream.horizon:
        raise ValueError(f"t={t} exceeds stream horizon {stream.horizon}")
    N = stream.N
    if not 1 <= x <= N - 1:
        raise ValueError(f"site must lie in 1..{N - 1}, got {x}")
    hi = int(np.searchsorted(stream.times, t, side="right"))
    kinds = stream.kinds
    poss = stream.positions
    outer_of = _boundary_sides(N)

    writes: dict = {}
    for i in range(hi):
        k = kinds[i]
        p = int(poss[i])
        if k == EXCHANGE:
            writes.setdefault(p, []).append(i)
            writes.setdefault(p + 1, []).append(i)
        else:
            writes.setdefault(p, []).append(i)

    def last_write(site, bound):
        ws = writes.get(site)
        if not ws:
            return -1
        j = bisect_right(ws, bound) - 1
        return ws[j] if j >= 0 else -1

    memo: dict = {}

    def node_of(site, bound):
        j = last_write(site, bound)
        return (site, j)

    top = node_of(x, hi - 1)
    stack = [top]
    while stack:
        site, j = stack[-1]
        if (site, j) in memo:
            stack.pop()
            continue
        if j < 0:
            memo[(site, j)] = int(eta0[site - 1])
            stack.pop()
            continue
        k = kinds[j]
        p = int(poss[j])
        if k == PLUS:
            memo[(site, j)] = 1
            stack.pop()
        elif k == MINUS:
            memo[(site, j)] = 0
            stack.pop()
        elif k == EXCHANGE:
            other = p + 1 if site == p else p
            dep = node_of(other, j - 1)
            if dep in memo:
                memo[(site, j)] = memo[dep]
                stack.pop()
            else:
                stack.append(dep)
        elif k == COPY:
            dep = node_of(outer_of[p], j - 1)
            if dep in memo:
                memo[(site, j)] = memo[dep]
                stack.pop()
            else:
                stack.append(dep)
        else:  # BRANCH
            dep1 = node_of(p, j - 1)
            dep2 = node_of(outer_of[p], j - 1)
            missing = [d for d in (dep1, dep2) if d not in memo]
            if missing:
                stack.extend(missing)
            else:
                memo[(site, j)] = memo[dep1] | memo[dep2]
                stack.pop()
    return memo[top]


# ---------------------------------------------------------------------------
# batched Markov sampling of dual runs (distribution-level workhorse)
# ---------------------------------------------------------------------------

@dataclass
class DualRunBatch:
    """Arrays over runs, plus flattened per-run event logs and survivors."""

    x: int
    t_horizon: float
    lifespan: np.ndarray
    kappa: np.ndarray
    max_position: np.ndarray
    failed: np.ndarray
    hit_horizon: np.ndarray
    truncated: np.ndarray
    ev_type: np.ndarray
    ev_k1: np.ndarray
    ev_k2: np.ndarray
    ev_count: np.ndarray
    ev_offset: np.ndarray
    sv_label: np.ndarray
    sv_pos: np.ndarray
    sv_count: np.ndarray
    sv_offset: np.ndarray

    @property
    def n_runs(self) -> int:
        return len(self.lifespan)

    def events_of(self, i: int):
        o, c = int(self.ev_offset[i]), int(self.ev_count[i])
        return list(zip(self.ev_type[o:o + c].tolist(),
                        self.ev_k1[o:o + c].tolist(),
                        self.ev_k2[o:o + c].tolist()))

    def survivors_of(self, i: int):
        o, c = int(self.sv_offset[i]), int(self.sv_count[i])
        return list(zip(self.sv_label[o:o + c].tolist(),
                        self.sv_pos[o:o + c].tolist()))

    def first_event_kinds(self) -> np.ndarray:
        """Type of the first boundary event per run, -1 when none occurred."""
        out = np.full(self.n_runs, -1, dtype=np.int64)
        has = self.ev_count > 0
        out[has] = self.ev_type[self.ev_offset[has]]
        return out


def sample_dual_runs(x: int, params: ModelParams, t_horizon: float, n_runs: int,
                     seed: int, max_flags: int = 128, ev_per_run: int = 256) -> DualRunBatch:
    """n_runs independent flag-process trajectories from {x}, simulated as
    the continuous-time Markov chain (same law as mark replay; checked by
    test against the replay driver)."""
    p = params
    ev_cap = n_runs * 16 + 65536
    sv_cap = n_runs * 4 + 1024
    out = DualRunBatch(
        x=x, t_horizon=t_horizon,
        lifespan=np.empty(n_runs), kappa=np.empty(n_runs, np.int64),
        max_position=np.empty(n_runs, np.int64),
        failed=np.empty(n_runs, np.uint8), hit_horizon=np.empty(n_runs, np.uint8),
        truncated=np.empty(n_runs, np.uint8),
        ev_type=np.empty(ev_cap, np.uint8), ev_k1=np.empty(ev_cap, np.int64),
        ev_k2=np.empty(ev_cap, np.int64),
        ev_count=np.empty(n_runs, np.int64), ev_offset=np.empty(n_runs, np.int64),
        sv_label=np.empty(sv_cap, np.int64), sv_pos=np.empty(sv_cap, np.int64),
        sv_count=np.empty(n_runs, np.int64), sv_offset=np.empty(n_runs, np.int64))
    _kernels.dual_batch(
        p.N, p.theta, p.r, p.rho_bar, p.b, p.c,
        p.r_prime, p.rho_bar_prime, p.b_prime, p.c_prime,
        int(x), float(t_horizon), seed, n_runs,
        out.lifespan, out.kappa, out.max_position, out.failed, out.hit_horizon,
        out.truncated, out.ev_type, out.ev_k1, out.ev_k2, out.ev_count,
        out.ev_offset, out.sv_label, out.sv_pos, out.sv_count, out.sv_offset,
        max_flags, ev_per_run)
    return out


def tree_from_events(events, survivors=(), closure_signs=None):
    """Rebuild the determination tree of one run from its event log.

    Returns a DeterminationTree, or FAILED on a copy-merge event, or None
    when survivors exist but no closure signs are supplied (censored run).
    """
    builder = _TreeBuilder(1)
    for etype, k1, k2 in events:
        if etype == _kernels.EV_PLUS:
            builder.close_label(k1, "+")
        elif etype == _kernels.EV_MINUS:
            builder.close_label(k1, "-")
        elif etype == _kernels.EV_BRANCH:
            builder.branch_label(k1, k2)
        else:
            return FAILED
    if survivors:
        if closure_signs is None:
            return None
        for lab, pos in survivors:
            builder.close_label(lab, closure_signs(pos))
    return DeterminationTree(builder.root)
