"""Poisson mark streams driving the replayable construction of the dynamics.

The process is a deterministic function of an initial configuration and N+6
independent Poisson point processes ("components"): one exchange clock per
bond at rate N^2, and per side four boundary clocks at rate N^(2-theta) times
(rho*r, (1-rho)*r, c, b) for fill / empty / copy / branch events. A merged,
time-sorted sequence of marks from all components is a :class:`MarkStream`.

Each component draws from its own generator seeded by (seed, kind, position),
so restricting attention to a subset of components is reproducible on its
own, and the merged stream is reproducible bit-for-bit from
(seed, params, horizon).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace

import numpy as np

# mark kinds (wire format uses these byte values)
EXCHANGE = 0   # position = bond x, exchanges sites (x, x+1)
PLUS = 1       # position = site 1 or N-1, sets it to 1
MINUS = 2      # position = site 1 or N-1, sets it to 0
COPY = 3       # position = site 2 or N-2, copies the outer neighbor onto it
BRANCH = 4     # position = site 2 or N-2, fills it if the outer neighbor is occupied

KIND_NAMES = {EXCHANGE: "exchange", PLUS: "plus", MINUS: "minus", COPY: "copy", BRANCH: "branch"}

_WIRE_DTYPE = np.dtype([("time", "<f8"), ("kind", "u1"), ("pos", "<u2")])


@dataclass(frozen=True)
class MarkStream:
    """Time-ascending marks over [0, horizon); replayable from the seed."""

    N: int
    horizon: float
    seed: int
    times: np.ndarray       # float64, ascending
    kinds: np.ndarray       # uint8
    positions: np.ndarray   # int64

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return zip(self.times.tolist(), self.kinds.tolist(), self.positions.tolist())

    def counts_by_kind(self) -> dict:
        return {KIND_NAMES[k]: int(np.count_nonzero(self.kinds == k)) for k in KIND_NAMES}


def component_rates(params) -> list:
    """All (kind, position, rate) components with positive rate."""
    N = params.N
    s = params.boundary_scale
    comps = [(EXCHANGE, x, params.bulk_scale) for x in range(1, N - 1)]
    comps += [
        (PLUS, 1, s * params.rho_bar * params.r),
        (MINUS, 1, s * (1.0 - params.rho_bar) * params.r),
        (COPY, 2, s * params.c),
        (BRANCH, 2, s * params.b),
        (PLUS, N - 1, s * params.rho_bar_prime * params.r_prime),
        (MINUS, N - 1, s * (1.0 - params.rho_bar_prime) * params.r_prime),
        (COPY, N - 2, s * params.c_prime),
        (BRANCH, N - 2, s * params.b_prime),
    ]
    return [(k, p, rate) for (k, p, rate) in comps if rate > 0.0]


def _component_rng(seed: int, kind: int, position: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(kind, position)))


def _component_times(rng, rate: float, horizon: float) -> np.ndarray:
    """Arrival times in [0, horizon) drawn as cumulative exponential gaps."""
    if horizon <= 0.0:
        return np.empty(0)
    chunks = []
    total = 0.0
    block = max(16, int(rate * horizon * 1.1) + 4)
    while True:
        gaps = rng.exponential(1.0 / rate, size=block)
        arr = total + np.cumsum(gaps)
        if arr[-1] >= horizon:
            chunks.append(arr[arr < horizon])
            break
        chunks.append(arr)
        total = arr[-1]
        block = max(16, block // 4)
    return np.concatenate(chunks)


def generate(params, horizon: float, seed: int) -> MarkStream:
    """Merged, sorted superposition of all component processes on [0, horizon)."""
    if horizon < 0.0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    all_t, all_k, all_p = [], [], []
    for kind, pos, rate in component_rates(params):
        t = _component_times(_component_rng(seed, kind, pos), rate, horizon)
        all_t.append(t)
        all_k.append(np.full(len(t), kind, dtype=np.uint8))
        all_p.append(np.full(len(t), pos, dtype=np.int64))
    if not all_t:
        times = np.empty(0)
        kinds = np.empty(0, np.uint8)
        positions = np.empty(0, np.int64)
    else:
        times = np.concatenate(all_t)
        kinds = np.concatenate(all_k)
        positions = np.concatenate(all_p)
        # ties (probability zero, but possible after float rounding) are
        # broken by kind then position so replay stays deterministic
        order = np.lexsort((positions, kinds, times))
        times, kinds, positions = times[order], kinds[order], positions[order]
    return MarkStream(params.N, float(horizon), int(seed), times, kinds, positions)


def iter_marks(params, horizon: float, seed: int):
    """Lazy time-ordered generation of the same sequence as :func:`generate`."""
    heap = []
    for kind, pos, rate in component_rates(params):
        rng = _component_rng(seed, kind, pos)
        t = rng.exponential(1.0 / rate)
        if t < horizon:
            heapq.heappush(heap, (t, kind, pos, rate, rng))
    while heap:
        t, kind, pos, rate, rng = heapq.heappop(heap)
        yield (t, kind, pos)
        t_next = t + rng.exponential(1.0 / rate)
        if t_next < horizon:
            heapq.heappush(heap, (t_next, kind, pos, rate, rng))


def restrict(stream: MarkStream, t0: float, t1: float) -> MarkStream:
    """Marks with time in [t0, t1), order preserved."""
    if not 0.0 <= t0 <= t1 <= stream.horizon:
        raise ValueError(f"window [{t0}, {t1}] outside [0, {stream.horizon}]")
    lo = np.searchsorted(stream.times, t0, side="left")
    hi = np.searchsorted(stream.times, t1, side="left")
    return replace(stream, horizon=float(t1), times=stream.times[lo:hi].copy(),
                   kinds=stream.kinds[lo:hi].copy(), positions=stream.positions[lo:hi].copy())


def concatenate(a: MarkStream, b: MarkStream) -> MarkStream:
    """Concatenate two streams whose windows abut (a before b)."""
    if len(a.times) and len(b.times) and b.times[0] < a.times[-1]:
        raise ValueError("streams overlap in time")
    return replace(a, horizon=float(b.horizon),
                   times=np.concatenate([a.times, b.times]),
                   kinds=np.concatenate([a.kinds, b.kinds]),
                   positions=np.concatenate([a.positions, b.positions]))


def reverse(stream: MarkStream, t: float) -> MarkStream:
    """Marks with time <= t, replayed backward: the mark at time s becomes a
    mark at time t - s, so applying the result forward walks the original
    marks in decreasing time order."""
    if t < 0.0 or t > stream.horizon:
        raise ValueError(f"t={t} outside [0, {stream.horizon}]")
    hi = np.searchsorted(stream.times, t, side="right")
    return replace(stream, horizon=float(t),
                   times=(t - stream.times[:hi])[::-1].copy(),
                   kinds=stream.kinds[:hi][::-1].copy(),
                   positions=stream.positions[:hi][::-1].copy())


def dump_binary(stream: MarkStream, path) -> None:
    """Little-endian (f64 time, u8 kind, u16 position) records."""
    rec = np.empty(len(stream.times), dtype=_WIRE_DTYPE)
    rec["time"] = stream.times
    rec["kind"] = stream.kinds
    rec["pos"] = stream.positions
    rec.tofile(path)


def load_binary(path, N: int, horizon: float, seed: int = -1) -> MarkStream:
    rec = np.fromfile(path, dtype=_WIRE_DTYPE)
    return MarkStream(N, float(horizon), int(seed),
                      rec["time"].astype(np.float64),
                      rec["kind"].astype(np.uint8),
                      rec["pos"].astype(np.int64))
