"""Hot inner loops, each in two interchangeable forms.

``*_loop`` functions are plain index loops compiled with numba when it is
available; ``*_np`` functions are vectorized numpy equivalents.  The public
names at the bottom pick one of the two according to
``FEEDCONTAGION_DISABLE_NUMBA``.  All randomness is drawn by the caller, so
both forms return identical results for identical inputs.

Infection state arrays use ``-1`` for "never infected"; otherwise the entry is
the synchronous round in which the node was infected (seeds: round 0).
"""
import numpy as np

from ._accel import HAS_NUMBA, njit

# --------------------------------------------------------------------------
# independent cascade: one run, coins aligned with the follower CSR


def icm_spread_loop(ptr, idx, coins, mu, seeds, max_steps):
    n = ptr.size - 1
    t = np.full(n, -1, np.int64)
    frontier = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    nf = 0
    for s in seeds:
        if t[s] < 0:
            t[s] = 0
            frontier[nf] = s
            nf += 1
    step = 0
    while nf > 0 and step < max_steps:
        step += 1
        nn = 0
        for i in range(nf):
            u = frontier[i]
            for e in range(ptr[u], ptr[u + 1]):
                v = idx[e]
                if t[v] < 0 and coins[e] < mu:
                    t[v] = step
                    nxt[nn] = v
                    nn += 1
        frontier, nxt = nxt, frontier
        nf = nn
    return t


def _gather_edges(ptr, frontier):
    starts = ptr[frontier]
    counts = ptr[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, np.int64)
    offs = np.repeat(np.cumsum(counts) - counts, counts)
    return np.repeat(starts, counts) + (np.arange(total) - offs)


def icm_spread_np(ptr, idx, coins, mu, seeds, max_steps):
    n = ptr.size - 1
    t = np.full(n, -1, np.int64)
    frontier = np.unique(np.asarray(seeds, np.int64))
    t[frontier] = 0
    step = 0
    while frontier.size and step < max_steps:
        step += 1
        e = _gather_edges(ptr, frontier)
        v = idx[e]
        ok = (coins[e] < mu) & (t[v] < 0)
        frontier = np.unique(v[ok])
        t[frontier] = step
    return t


# --------------------------------------------------------------------------
# suppressed (frozen) model: one trial per node at first exposure


def fsm_spread_loop(ptr, idx, coins, mu, seeds, max_steps):
    n = ptr.size - 1
    # -1 undecided, -2 immune, >=0 infection round
    t = np.full(n, -1, np.int64)
    frontier = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    nf = 0
    for s in seeds:
        if t[s] == -1:
            t[s] = 0
            frontier[nf] = s
            nf += 1
    step = 0
    while nf > 0 and step < max_steps:
        step += 1
        nn = 0
        for i in range(nf):
            u = frontier[i]
            for e in range(ptr[u], ptr[u + 1]):
                v = idx[e]
                if t[v] == -1:
                    if coins[v] < mu:
                        t[v] = step
                        nxt[nn] = v
                        nn += 1
                    else:
                        t[v] = -2
        frontier, nxt = nxt, frontier
        nf = nn
    for v in range(n):
        if t[v] == -2:
            t[v] = -1
    return t


def fsm_spread_np(ptr, idx, coins, mu, seeds, max_steps):
    n = ptr.size - 1
    t = np.full(n, -1, np.int64)
    frontier = np.unique(np.asarray(seeds, np.int64))
    t[frontier] = 0
    step = 0
    while frontier.size and step < max_steps:
        step += 1
        v = np.unique(idx[_gather_edges(ptr, frontier)])
        v = v[t[v] == -1]
        hit = coins[v] < mu
        t[v[~hit]] = -2
        frontier = v[hit]
        t[frontier] = step
    t[t == -2] = -1
    return t


# --------------------------------------------------------------------------
# fractional threshold (complex contagion), deterministic


def threshold_spread_loop(ptr, idx, friend_count, phi, seeds, max_steps):
    n = ptr.size - 1
    t = np.full(n, -1, np.int64)
    cnt = np.zeros(n, np.int64)
    frontier = np.empty(n, np.int64)
    cand = np.empty(n, np.int64)
    mark = np.zeros(n, np.bool_)
    nf = 0
    for s in seeds:
        if t[s] < 0:
            t[s] = 0
            frontier[nf] = s
            nf += 1
    step = 0
    while nf > 0 and step < max_steps:
        step += 1
        nc = 0
        for i in range(nf):
            u = frontier[i]
            for e in range(ptr[u], ptr[u + 1]):
                v = idx[e]
                cnt[v] += 1
                if t[v] < 0 and not mark[v]:
                    mark[v] = True
                    cand[nc] = v
                    nc += 1
        nf = 0
        for i in range(nc):
            v = cand[i]
            mark[v] = False
            if cnt[v] / friend_count[v] >= phi:
                t[v] = step
                frontier[nf] = v
                nf += 1
        # keep frontier order independent of discovery order
        frontier[:nf] = np.sort(frontier[:nf])
    return t


def threshold_spread_np(ptr, idx, friend_count, phi, seeds, max_steps):
    n = ptr.size - 1
    t = np.full(n, -1, np.int64)
    cnt = np.zeros(n, np.int64)
    frontier = np.unique(np.asarray(seeds, np.int64))
    t[frontier] = 0
    step = 0
    while frontier.size and step < max_steps:
        step += 1
        v = idx[_gather_edges(ptr, frontier)]
        cnt += np.bincount(v, minlength=n)
        cand = np.unique(v)
        cand = cand[t[cand] < 0]
        frontier = cand[cnt[cand] / friend_count[cand] >= phi]
        t[frontier] = step
    return t


# --------------------------------------------------------------------------
# reachability for a batch of edge-activation patterns (oracle and batch MC)


def reach_batch_loop(src, dst, active, seeds, n):
    """``reached[b, v]``: v reachable from seeds over edges active in row b."""
    B = active.shape[0]
    E = src.size
    reached = np.zeros((B, n), np.bool_)
    for b in range(B):
        for s in seeds:
            reached[b, s] = True
        changed = True
        while changed:
            changed = False
            for e in range(E):
                if active[b, e] and reached[b, src[e]] and not reached[b, dst[e]]:
                    reached[b, dst[e]] = True
                    changed = True
    return reached


def reach_batch_np(src, dst, active, seeds, n):
    B = active.shape[0]
    reached = np.zeros((B, n), np.bool_)
    reached[:, np.asarray(seeds, np.int64)] = True
    changed = True
    while changed:
        changed = False
        for e in range(src.size):
            new = active[:, e] & reached[:, src[e]] & ~reached[:, dst[e]]
            if new.any():
                reached[:, dst[e]] |= new
                changed = True
    return reached


def enumerate_icm_loop(src, dst, mu, seeds, n):
    """Exact per-node infection probabilities and size distribution."""
    E = src.size
    node_p = np.zeros(n)
    size_p = np.zeros(n + 1)
    reached = np.zeros(n, np.bool_)
    for mask in range(1 << E):
        on = 0
        for e in range(E):
            on += (mask >> e) & 1
        w = mu**on * (1.0 - mu) ** (E - on)
        if w == 0.0:
            continue
        reached[:] = False
        for s in seeds:
            reached[s] = True
        changed = True
        while changed:
            changed = False
            for e in range(E):
                if (mask >> e) & 1 and reached[src[e]] and not reached[dst[e]]:
                    reached[dst[e]] = True
                    changed = True
        size = 0
        for v in range(n):
            if reached[v]:
                node_p[v] += w
                size += 1
        size_p[size] += w
    return node_p, size_p


def enumerate_icm_np(src, dst, mu, seeds, n, chunk=1 << 14):
    E = src.size
    node_p = np.zeros(n)
    size_p = np.zeros(n + 1)
    total = 1 << E
    bits = np.arange(E)
    for lo in range(0, total, chunk):
        masks = np.arange(lo, min(total, lo + chunk))
        active = ((masks[:, None] >> bits) & 1).astype(np.bool_)
        on = active.sum(axis=1)
        w = mu**on * (1.0 - mu) ** (E - on)
        r = reach_batch_np(src, dst, active, seeds, n)
        node_p += w @ r
        size_p += np.bincount(r.sum(axis=1), weights=w, minlength=n + 1)
    return node_p, size_p


# --------------------------------------------------------------------------
# generating-function fixed point  u = G1(1 - T + T u)


def fixed_point_loop(coef, T, tol, max_iter):
    """``coef`` holds G1's coefficients, lowest order first.

    Returns (u, residual, iterations).  Starts at u = 0 so the smallest
    (stable) root is selected; halves the step if the iterates oscillate.
    """
    m = coef.size
    u = 0.0
    damp = 1.0
    prev_delta = 0.0
    resid = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        x = 1.0 - T + T * u
        g = 0.0
        for j in range(m - 1, -1, -1):
            g = g * x + coef[j]
        delta = g - u
        resid = abs(delta)
        if resid < tol:
            break
        if prev_delta * delta < 0.0:
            damp = 0.5
        prev_delta = delta
        u = u + damp * delta
    return u, resid, it


def fixed_point_np(coef, T, tol, max_iter):
    rev = np.asarray(coef, dtype=float)[::-1]
    u = 0.0
    damp = 1.0
    prev_delta = 0.0
    resid = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        delta = float(np.polyval(rev, 1.0 - T + T * u)) - u
        resid = abs(delta)
        if resid < tol:
            break
        if prev_delta * delta < 0.0:
            damp = 0.5
        prev_delta = delta
        u = u + damp * delta
    return u, resid, it


# --------------------------------------------------------------------------
# weighted sampling without replacement (exponential-keys method)


def weighted_topk_counts_loop(weights, uniforms, budget):
    """Per-position counts of selection over trials.

    Row ``i`` of ``uniforms`` selects the ``budget`` positions with the largest
    keys ``log(u) / w``, which is a weighted sample without replacement.
    """
    trials, L = uniforms.shape
    counts = np.zeros(L, np.int64)
    keys = np.empty(L)
    for i in range(trials):
        for p in range(L):
            keys[p] = np.log(uniforms[i, p]) / weights[p]
        order = np.argsort(-keys, kind="mergesort")
        for j in range(budget):
            counts[order[j]] += 1
    return counts


def weighted_topk_counts_np(weights, uniforms, budget):
    keys = np.log(uniforms) / weights
    order = np.argsort(-keys, axis=1, kind="stable")[:, :budget]
    return np.bincount(order.ravel(), minlength=weights.size).astype(np.int64)


# --------------------------------------------------------------------------
# dispatch

icm_spread_nb = njit(icm_spread_loop)
fsm_spread_nb = njit(fsm_spread_loop)
threshold_spread_nb = njit(threshold_spread_loop)
reach_batch_nb = njit(reach_batch_loop)
fixed_point_nb = njit(fixed_point_loop)
weighted_topk_counts_nb = njit(weighted_topk_counts_loop)

enumerate_icm_nb = njit(enumerate_icm_loop)

if HAS_NUMBA:
    icm_spread = icm_spread_nb
    fsm_spread = fsm_spread_nb
    threshold_spread = threshold_spread_nb
    reach_batch = reach_batch_nb
    enumerate_icm = enumerate_icm_nb
    fixed_point = fixed_point_nb
    weighted_topk_counts = weighted_topk_counts_nb
else:
    icm_spread = icm_spread_np
    fsm_spread = fsm_spread_np
    threshold_spread = threshold_spread_np
    reach_batch = reach_batch_np
    enumerate_icm = enumerate_icm_np
    fixed_point = fixed_point_np
    weighted_topk_counts = weighted_topk_counts_np

BACKEND = "numba" if HAS_NUMBA else "numpy"
