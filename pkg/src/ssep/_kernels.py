"""Numba kernels: event-driven simulation, mark replay, dual flag runs,
tree sampling, and the explicit finite-difference steppers.

All stochastic kernels draw from a splitmix64 stream; per-replica streams are
derived by hashing (seed, replica index), so results are reproducible and
replicas can be generated in any order or split across processes.

Site convention matches the rest of the package: occupancy arrays have
length N-1 with entry x-1 holding site x.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# mark kind codes, kept in sync with ssep.marks
EXCHANGE = 0
PLUS = 1
MINUS = 2
COPY = 3
BRANCH = 4

_U64 = np.uint64
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U64(33))) * _U64(0xFF51AFD7ED558CCD)
    z = (z ^ (z >> _U64(33))) * _U64(0xC4CEB9FE1A85EC53)
    return z ^ (z >> _U64(33))


@njit(cache=True, inline="always")
def rng_init(seed, stream_id):
    return _mix64(_U64(seed) + _U64(0x9E3779B97F4A7C15) * (_U64(stream_id) + _U64(1)))


@njit(cache=True, inline="always")
def _next_u64(state):
    state = state + _U64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    z = z ^ (z >> _U64(31))
    return state, z


@njit(cache=True, inline="always")
def _uniform(state):
    state, z = _next_u64(state)
    return state, (z >> _U64(11)) * _INV53


@njit(cache=True, inline="always")
def _exponential(state):
    state, u = _uniform(state)
    return state, -np.log(1.0 - u)


@njit(cache=True)
def bernoulli_fill(eta, probs, state):
    """eta[i] = 1 with probability probs[i], independently."""
    for i in range(len(eta)):
        state, u = _uniform(state)
        eta[i] = 1 if u < probs[i] else 0
    return state


# ---------------------------------------------------------------------------
# event-driven engine (active-bond bookkeeping, O(1) per event)
# ---------------------------------------------------------------------------

@njit(cache=True)
def gillespie_run(eta, N, theta, r, rho, b, c, rp, rhop, bp, cp,
                  t_end, state, acc, acc_start, act_list, act_pos, last_t):
    """Evolve ``eta`` in place over [0, t_end].

    If acc_start < t_end, per-site occupation time over [acc_start, t_end] is
    added into ``acc`` (event-driven, O(1) per flip). act_list/act_pos are
    (N-2)-sized scratch arrays, last_t an (N-1)-sized scratch array.
    """
    M = N - 1
    n2 = float(N) * float(N)
    sb = float(N) ** (2.0 - theta)
    n_act = 0
    for i in range(N - 2):
        act_pos[i] = -1
    for i in range(N - 2):
        if eta[i] != eta[i + 1]:
            act_pos[i] = n_act
            act_list[n_act] = i
            n_act += 1
    do_acc = acc_start < t_end
    if do_acc:
        for i in range(M):
            last_t[i] = acc_start
    t = 0.0
    while True:
        e1 = eta[0]
        e2 = eta[1]
        eR = eta[M - 1]
        eRm = eta[M - 2]
        cl1 = r * (rho if e1 == 0 else 1.0 - rho)
        cl2 = (c if e1 != e2 else 0.0) + (b if (e1 == 1 and e2 == 0) else 0.0)
        cr1 = rp * (rhop if eR == 0 else 1.0 - rhop)
        cr2 = (cp if eR != eRm else 0.0) + (bp if (eR == 1 and eRm == 0) else 0.0)
        bnd = sb * (cl1 + cl2 + cr1 + cr2)
        total = n2 * n_act + bnd
        if total <= 0.0:
            t = t_end
            break
        state, ex = _exponential(state)
        t += ex / total
        if t > t_end:
            break
        state, u = _uniform(state)
        pick = u * total
        if pick < n2 * n_act:
            k = int(pick / n2)
            if k >= n_act:
                k = n_act - 1
            bd = act_list[k]
            va = eta[bd]
            eta[bd] = eta[bd + 1]
            eta[bd + 1] = va
            if do_acc and t >= acc_start:
                if va == 1:
                    acc[bd] += t - last_t[bd]
                else:
                    acc[bd + 1] += t - last_t[bd + 1]
                last_t[bd] = t
                last_t[bd + 1] = t
            for step in range(2):
                nb = bd - 1 if step == 0 else bd + 1
                if 0 <= nb <= N - 3:
                    now = eta[nb] != eta[nb + 1]
                    was = act_pos[nb] >= 0
                    if now and not was:
                        act_pos[nb] = n_act
                        act_list[n_act] = nb
                        n_act += 1
                    elif was and not now:
                        j = act_pos[nb]
                        last = act_list[n_act - 1]
                        act_list[j] = last
                        act_pos[last] = j
                        act_pos[nb] = -1
                        n_act -= 1
        else:
            w = (pick - n2 * n_act) / sb
            if w < cl1:
                site = 0
            elif w < cl1 + cl2:
                site = 1
            elif w < cl1 + cl2 + cr1:
                site = M - 1
            else:
                site = M - 2
            old = eta[site]
            eta[site] = 1 - old
            if do_acc and t >= acc_start:
                if old == 1:
                    acc[site] += t - last_t[site]
                last_t[site] = t
            for step in range(2):
                nb = site - 1 if step == 0 else site
                if 0 <= nb <= N - 3:
                    now = eta[nb] != eta[nb + 1]
                    was = act_pos[nb] >= 0
                    if now and not was:
                        act_pos[nb] = n_act
                        act_list[n_act] = nb
                        n_act += 1
                    elif was and not now:
                        j = act_pos[nb]
                        last = act_list[n_act - 1]
                        act_list[j] = last
                        act_pos[last] = j
                        act_pos[nb] = -1
                        n_act -= 1
    if do_acc:
        for i in range(M):
            if eta[i] == 1:
                acc[i] += t_end - last_t[i]
    return state


@njit(cache=True)
def gillespie_final_batch(N, theta, r, rho, b, c, rp, rhop, bp, cp,
                          f0_vals, t_end, seed, id0, out):
    """n independent replicas: Bernoulli(f0) initial draw then evolution to
    t_end; final configurations written to out (n, N-1). Replica i draws
    from the stream keyed by (seed, id0 + i), so chunked generation with
    offsets reproduces a single sequential run."""
    n = out.shape[0]
    M = N - 1
    eta = np.empty(M, np.uint8)
    acc = np.empty(1, np.float64)
    last_t = np.empty(M, np.float64)
    act_list = np.empty(N - 2, np.int64)
    act_pos = np.empty(N - 2, np.int64)
    for i in range(n):
        state = rng_init(seed, id0 + i)
        state = bernoulli_fill(eta, f0_vals, state)
        state = gillespie_run(eta, N, theta, r, rho, b, c, rp, rhop, bp, cp,
                              t_end, state, acc, t_end + 1.0, act_list, act_pos, last_t)
        for j in range(M):
            out[i, j] = eta[j]


@njit(cache=True)
def gillespie_time_average_batch(N, theta, r, rho, b, c, rp, rhop, bp, cp,
                                 f0_vals, t_burn, t_end, seed, id0, acc_out):
    """n trajectories; occupation time over [t_burn, t_end] accumulated per
    trajectory into acc_out (n, N-1)."""
    n = acc_out.shape[0]
    M = N - 1
    eta = np.empty(M, np.uint8)
    last_t = np.empty(M, np.float64)
    act_list = np.empty(N - 2, np.int64)
    act_pos = np.empty(N - 2, np.int64)
    for i in range(n):
        state = rng_init(seed, id0 + i)
        state = bernoulli_fill(eta, f0_vals, state)
        state = gillespie_run(eta, N, theta, r, rho, b, c, rp, rhop, bp, cp,
                              t_end, state, acc_out[i], t_burn, act_list, act_pos, last_t)


# ---------------------------------------------------------------------------
# mark replay engine
# ---------------------------------------------------------------------------

@njit(cache=True)
def graphical_run(eta, times, kinds, poss, i0, i1, t_offset, t_end):
    """Apply marks times[i0:i1] with (time - t_offset) <= t_end, in order.
    Returns the index of the first unapplied mark."""
    N = len(eta) + 1
    i = i0
    while i < i1:
        if times[i] - t_offset > t_end:
            break
        k = kinds[i]
        p = poss[i]
        if k == EXCHANGE:
            va = eta[p - 1]
            eta[p - 1] = eta[p]
            eta[p] = va
        elif k == PLUS:
            eta[p - 1] = 1
        elif k == MINUS:
            eta[p - 1] = 0
        elif k == COPY:
            if p == 2:
                eta[1] = eta[0]
            else:
                eta[p - 1] = eta[p]
        else:
            if p == 2:
                if eta[0] == 1:
                    eta[1] = 1
            else:
                if eta[p] == 1:
                    eta[p - 1] = 1
        i += 1
    return i


@njit(cache=True)
def graphical_final_batch(N, f0_vals, times, kinds, poss,
                          starts, ends, offsets, t_end, seed, id0, out):
    """Replicas replayed from disjoint windows of one mark stream; replica i
    uses marks [starts[i], ends[i]) shifted by offsets[i]."""
    n = out.shape[0]
    M = N - 1
    eta = np.empty(M, np.uint8)
    for i in range(n):
        state = rng_init(seed, id0 + i)
        state = bernoulli_fill(eta, f0_vals, state)
        graphical_run(eta, times, kinds, poss, starts[i], ends[i], offsets[i], t_end)
        for j in range(M):
            out[i, j] = eta[j]


# ---------------------------------------------------------------------------
# dual flag process (continuous-time Markov simulation with labels)
# ---------------------------------------------------------------------------

EV_PLUS = 0
EV_MINUS = 1
EV_BRANCH = 2
EV_COPY_MERGE = 3


@njit(cache=True)
def dual_run(N, theta, r, rho, b, c, rp, rhop, bp, cp, x0, t_end, state,
             pos_of, label_of, site_slot, bonds_buf,
             ev_type, ev_k1, ev_k2, ev_base, ev_cap,
             sv_label, sv_pos, sv_base, sv_cap):
    """One labeled flag trajectory started from {x0}.

    Flags perform rate-N^2 bond exchanges (swapping labels when both
    endpoints are flagged). At scale N^(2-theta): a flag at site 1 / N-1 is
    deleted at rate r / r' (recorded as a +/- event split by the reservoir
    density); a flag at site 2 / N-2 spawns a flag at the outer neighbor at
    rate b / b' when that site is unflagged (the recorded event carries the
    reused label otherwise); a copy event at rate c / c' moves the flag
    outward, or, if the outer site is flagged too, deletes it and marks the
    run failed.

    Returns (state, lifespan, kappa, max_pos, failed, hit_horizon, n_ev,
    n_sv, truncated). site_slot must be -1 everywhere on entry; it is
    restored before returning.
    """
    max_flags = len(pos_of)
    n_flags = 1
    pos_of[0] = x0
    label_of[0] = 1
    site_slot[x0] = 0
    next_label = 2
    kappa = 1
    max_pos = x0
    failed = False
    hit = False
    trunc = False
    n_ev = 0
    n_sv = 0
    n2 = float(N) * float(N)
    sb = float(N) ** (2.0 - theta)
    s = 0.0
    while n_flags > 0:
        nbd = 0
        for i in range(n_flags):
            p = pos_of[i]
            if p <= N - 2:
                bonds_buf[nbd] = p
                nbd += 1
            if p >= 2 and site_slot[p - 1] < 0:
                bonds_buf[nbd] = p - 1
                nbd += 1
        w_l1 = r * sb if site_slot[1] >= 0 else 0.0
        w_lb = b * sb if site_slot[2] >= 0 else 0.0
        w_lc = c * sb if site_slot[2] >= 0 else 0.0
        w_r1 = rp * sb if site_slot[N - 1] >= 0 else 0.0
        w_rb = bp * sb if site_slot[N - 2] >= 0 else 0.0
        w_rc = cp * sb if site_slot[N - 2] >= 0 else 0.0
        total = n2 * nbd + w_l1 + w_lb + w_lc + w_r1 + w_rb + w_rc
        state, ex = _exponential(state)
        s += ex / total
        if s > t_end:
            hit = True
            break
        state, u = _uniform(state)
        pick = u * total
        if pick < n2 * nbd:
            k = int(pick / n2)
            if k >= nbd:
                k = nbd - 1
            x = bonds_buf[k]
            sl = site_slot[x]
            sr = site_slot[x + 1]
            if sl >= 0 and sr >= 0:
                tmp = label_of[sl]
                label_of[sl] = label_of[sr]
                label_of[sr] = tmp
            elif sl >= 0:
                pos_of[sl] = x + 1
                site_slot[x] = -1
                site_slot[x + 1] = sl
                if x + 1 > max_pos:
                    max_pos = x + 1
            else:
                pos_of[sr] = x
                site_slot[x + 1] = -1
                site_slot[x] = sr
        else:
            w = pick - n2 * nbd
            if w < w_l1 + w_r1:
                # deletion by a reservoir event
                if w < w_l1:
                    site = 1
                    state, u2 = _uniform(state)
                    etype = EV_PLUS if u2 < rho else EV_MINUS
                else:
                    site = N - 1
                    state, u2 = _uniform(state)
                    etype = EV_PLUS if u2 < rhop else EV_MINUS
                sl = site_slot[site]
                if n_ev < ev_cap:
                    ev_type[ev_base + n_ev] = etype
                    ev_k1[ev_base + n_ev] = label_of[sl]
                    ev_k2[ev_base + n_ev] = 0
                    n_ev += 1
                else:
                    trunc = True
                site_slot[site] = -1
                n_flags -= 1
                if sl != n_flags:
                    pos_of[sl] = pos_of[n_flags]
                    label_of[sl] = label_of[n_flags]
                    site_slot[pos_of[sl]] = sl
            elif w < w_l1 + w_r1 + w_lb + w_rb:
                # branching
                if w < w_l1 + w_r1 + w_lb:
                    inner, outer = 2, 1
                else:
                    inner, outer = N - 2, N - 1
                k1 = label_of[site_slot[inner]]
                if site_slot[outer] < 0:
                    if n_flags >= max_flags:
                        trunc = True
                        break
                    pos_of[n_flags] = outer
                    label_of[n_flags] = next_label
                    site_slot[outer] = n_flags
                    n_flags += 1
                    kappa += 1
                    k2 = next_label
                    next_label += 1
                    if outer > max_pos:
                        max_pos = outer
                else:
                    k2 = label_of[site_slot[outer]]
                if n_ev < ev_cap:
                    ev_type[ev_base + n_ev] = EV_BRANCH
                    ev_k1[ev_base + n_ev] = k1
                    ev_k2[ev_base + n_ev] = k2
                    n_ev += 1
                else:
                    trunc = True
            else:
                # copy event at an inner boundary site
                if w < w_l1 + w_r1 + w_lb + w_rb + w_lc:
                    inner, outer = 2, 1
                else:
                    inner, outer = N - 2, N - 1
                sl = site_slot[inner]
                if site_slot[outer] < 0:
                    pos_of[sl] = outer
                    site_slot[inner] = -1
                    site_slot[outer] = sl
                    if outer > max_pos:
                        max_pos = outer
                else:
                    failed = True
                    if n_ev < ev_cap:
                        ev_type[ev_base + n_ev] = EV_COPY_MERGE
                        ev_k1[ev_base + n_ev] = label_of[sl]
                        ev_k2[ev_base + n_ev] = label_of[site_slot[outer]]
                        n_ev += 1
                    else:
                        trunc = True
                    site_slot[inner] = -1
                    n_flags -= 1
                    if sl != n_flags:
                        pos_of[sl] = pos_of[n_flags]
                        label_of[sl] = label_of[n_flags]
                        site_slot[pos_of[sl]] = sl
    lifespan = t_end if hit else s
    for i in range(n_flags):
        if hit and not trunc and n_sv < sv_cap:
            sv_label[sv_base + n_sv] = label_of[i]
            sv_pos[sv_base + n_sv] = pos_of[i]
            n_sv += 1
        elif hit and n_sv >= sv_cap:
            trunc = True
        site_slot[pos_of[i]] = -1
    return state, lifespan, kappa, max_pos, failed, hit, n_ev, n_sv, trunc


@njit(cache=True)
def dual_batch(N, theta, r, rho, b, c, rp, rhop, bp, cp, x0, t_end, seed, n_runs,
               out_lifespan, out_kappa, out_maxpos, out_failed, out_hit, out_trunc,
               ev_type, ev_k1, ev_k2, ev_count, ev_offset,
               sv_label, sv_pos, sv_count, sv_offset, max_flags, ev_per_run):
    M = max(N, 4)
    pos_of = np.empty(max_flags, np.int64)
    label_of = np.empty(max_flags, np.int64)
    site_slot = np.full(M, -1, np.int64)
    bonds_buf = np.empty(2 * max_flags, np.int64)
    ev_base = 0
    sv_base = 0
    ev_cap_total = len(ev_type)
    sv_cap_total = len(sv_label)
    for i in range(n_runs):
        state = rng_init(seed, i)
        ev_cap = min(ev_per_run, ev_cap_total - ev_base)
        sv_cap = min(max_flags, sv_cap_total - sv_base)
        (state, lifespan, kappa, max_pos, failed, hit, n_ev, n_sv, trunc) = dual_run(
            N, theta, r, rho, b, c, rp, rhop, bp, cp, x0, t_end, state,
            pos_of, label_of, site_slot, bonds_buf,
            ev_type, ev_k1, ev_k2, ev_base, ev_cap,
            sv_label, sv_pos, sv_base, sv_cap)
        out_lifespan[i] = lifespan
        out_kappa[i] = kappa
        out_maxpos[i] = max_pos
        out_failed[i] = 1 if failed else 0
        out_hit[i] = 1 if hit else 0
        out_trunc[i] = 1 if trunc else 0
        ev_count[i] = n_ev
        ev_offset[i] = ev_base
        sv_count[i] = n_sv
        sv_offset[i] = sv_base
        ev_base += n_ev
        sv_base += n_sv


# ---------------------------------------------------------------------------
# labeled-tree sampling (sample + solve fused, explicit stack)
# ---------------------------------------------------------------------------

@njit(cache=True)
def gw_solve_batch(p_plus, p_branch, n_samples, max_nodes, seed, seed_offset):
    """Sample n_samples random determination trees (each starred leaf
    independently branches into two with probability p_branch, otherwise
    resolves to + with probability p_plus / (1 - p_branch)) and solve each.

    Returns (n_plus, n_minus, n_overflow).
    """
    stack_state = np.empty(65536, np.uint8)
    stack_v1 = np.empty(65536, np.int8)
    depth_cap = len(stack_state)
    n_plus = 0
    n_minus = 0
    n_over = 0
    for i in range(n_samples):
        state = rng_init(seed, seed_offset + i)
        depth = 0
        n_nodes = 1
        descend = True
        val = np.int8(0)
        over = False
        while True:
            if descend:
                state, u = _uniform(state)
                if u < p_branch:
                    n_nodes += 2
                    if n_nodes > max_nodes or depth >= depth_cap:
                        over = True
                        break
                    stack_state[depth] = 0
                    depth += 1
                else:
                    n_nodes += 1
                    if n_nodes > max_nodes:
                        over = True
                        break
                    val = np.int8(1) if u < p_branch + p_plus else np.int8(-1)
                    descend = False
            else:
                if depth == 0:
                    break
                depth -= 1
                if stack_state[depth] == 0:
                    stack_v1[depth] = val
                    stack_state[depth] = 1
                    depth += 1
                    descend = True
                else:
                    if val != 1:
                        val = stack_v1[depth]
        if over:
            n_over += 1
        elif val == 1:
            n_plus += 1
        else:
            n_minus += 1
    return n_plus, n_minus, n_over


# ---------------------------------------------------------------------------
# finite-difference steppers
# ---------------------------------------------------------------------------

@njit(cache=True)
def density_euler(rho, work, N, dt, n_steps, a_l, a_r):
    """Explicit Euler for d/dt rho = N^2 (rho(x+1)+rho(x-1)-2 rho(x)) on the
    grid sites 3..N-3 with pinned end values a_l, a_r."""
    n2 = float(N) * float(N)
    M = len(rho)
    rho[0] = a_l
    rho[M - 1] = a_r
    for s in range(n_steps):
        for i in range(1, M - 1):
            work[i] = rho[i] + dt * n2 * (rho[i + 1] + rho[i - 1] - 2.0 * rho[i])
        for i in range(1, M - 1):
            rho[i] = work[i]
    return


@njit(cache=True)
def density_euler_trace(rho, work, N, dt, n_steps, a_l_trace, a_r_trace, step0):
    """Same stepper with time-dependent pinned values sampled per step."""
    n2 = float(N) * float(N)
    M = len(rho)
    for s in range(n_steps):
        rho[0] = a_l_trace[step0 + s]
        rho[M - 1] = a_r_trace[step0 + s]
        for i in range(1, M - 1):
            work[i] = rho[i] + dt * n2 * (rho[i + 1] + rho[i - 1] - 2.0 * rho[i])
        for i in range(1, M - 1):
            rho[i] = work[i]
    rho[0] = a_l_trace[step0 + n_steps]
    rho[M - 1] = a_r_trace[step0 + n_steps]
    return


@njit(cache=True)
def corr_euler(phi, rho, rho_work, N, dt, n_steps, a_l, a_r,
               bx, by, dx, b_new, d_new):
    """Coupled explicit Euler for the two-point correlation field.

    phi is a full (N, N) array indexed by sites; only the listed points are
    evolved (bx/by: off-diagonal bulk points, four-neighbor Laplacian; dx:
    diagonal pairs (x, x+1), reflected stencil plus the squared-gradient
    source). Everything else is Dirichlet data and stays untouched. rho is
    the density grid on sites 3..N-3 (pinned at a_l, a_r), co-evolved with
    the same time step.
    """
    n2 = float(N) * float(N)
    nB = len(bx)
    nD = len(dx)
    M = len(rho)
    rho[0] = a_l
    rho[M - 1] = a_r
    for s in range(n_steps):
        for i in range(nB):
            x = bx[i]
            y = by[i]
            b_new[i] = phi[x, y] + dt * n2 * (
                phi[x + 1, y] + phi[x - 1, y] + phi[x, y + 1] + phi[x, y - 1]
                - 4.0 * phi[x, y])
        for i in range(nD):
            x = dx[i]
            grad = rho[x + 1 - 3] - rho[x - 3]
            g = -n2 * grad * grad
            d_new[i] = phi[x, x + 1] + dt * (n2 * (
                phi[x - 1, x + 1] + phi[x, x + 2] - 2.0 * phi[x, x + 1]) + g)
        for i in range(nB):
            phi[bx[i], by[i]] = b_new[i]
        for i in range(nD):
            phi[dx[i], dx[i] + 1] = d_new[i]
        for i in range(1, M - 1):
            rho_work[i] = rho[i] + dt * n2 * (rho[i + 1] + rho[i - 1] - 2.0 * rho[i])
        for i in range(1, M - 1):
            rho[i] = rho_work[i]
    return


# ---------------------------------------------------------------------------
# absorbed random walk (hitting estimates for the density representation)
# ---------------------------------------------------------------------------

@njit(cache=True)
def rw_hitting_batch(N, x0, t_max, n_samples, seed, f0_site_vals):
    """Rate-N^2-per-neighbor walk started at x0, absorbed at sites 3 and N-3
    or stopped at time t_max. Returns (n_left, n_right, n_interior,
    sum over interior stops of f0 at the stop site)."""
    n2 = float(N) * float(N)
    n_left = 0
    n_right = 0
    n_int = 0
    acc = 0.0
    for i in range(n_samples):
        state = rng_init(seed, i)
        pos = x0
        t = 0.0
        while True:
            if pos == 3:
                n_left += 1
                break
            if pos == N - 3:
                n_right += 1
                break
            state, ex = _exponential(state)
            t += ex / (2.0 * n2)
            if t > t_max:
                n_int += 1
                acc += f0_site_vals[pos - 1]
                break
            state, u = _uniform(state)
            pos = pos + 1 if u < 0.5 else pos - 1
    return n_left, n_right, n_int, acc
