"""Inner loops: Bellman sweeps, policy evaluation and the slot simulator.

Each kernel has a vectorized numpy implementation and a loop-style twin
compiled with ``numba.njit``.  The compiled path is used when numba is
importable and ``AOIBUF_DISABLE_JIT`` is unset (or ``0``); both paths return
identical results up to floating-point summation order.
"""

from __future__ import annotations

import os

import numpy as np

MGF, MAX_AGE, ROUND_ROBIN, RANDOM_M, NEVER = range(5)

_DISABLED = os.environ.get("AOIBUF_DISABLE_JIT", "0").lower() not in ("", "0", "false", "no")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_JIT = HAVE_NUMBA and not _DISABLED


# --------------------------------------------------------------------------
# numpy implementations


def value_iteration_np(err, succ, fail, p, lam, gamma, v0, threshold, max_iter):
    v = v0.copy()
    residuals = []
    base1 = err + lam
    for it in range(max_iter):
        vf = v[fail]
        q0 = err + gamma * vf
        q1 = base1 + gamma * (p * v[succ] + (1.0 - p) * vf)
        v_new = np.minimum(q0, q1)
        res = float(np.max(np.abs(v_new - v)))
        residuals.append(res)
        v = v_new
        if res <= threshold:
            return v, q0, q1, it + 1, np.array(residuals)
    return v, q0, q1, max_iter, np.array(residuals)


def policy_evaluation_np(reward, action, succ, fail, p, gamma, u0, threshold, max_iter):
    u = u0.copy()
    w_succ = np.where(action, p, 0.0)
    w_fail = 1.0 - w_succ
    for it in range(max_iter):
        u_new = reward + gamma * (w_succ * u[succ] + w_fail * u[fail])
        res = float(np.max(np.abs(u_new - u)))
        u = u_new
        if res <= threshold:
            return u, it + 1
    return u, max_iter


def _select_np(policy, M, t, gain_now, head_now, keys_now):
    R, N = head_now.shape
    chosen = np.zeros((R, N), dtype=bool)
    m = min(M, N)
    if policy == NEVER or m == 0:
        return chosen
    rows = np.arange(R)[:, None]
    idx = np.broadcast_to(np.arange(N), (R, N))
    if policy == MGF:
        order = np.lexsort((idx, -head_now, -gain_now), axis=-1)[:, :m]
        chosen[rows, order] = gain_now[rows, order] >= 0.0
    elif policy == MAX_AGE:
        order = np.lexsort((idx, -head_now), axis=-1)[:, :m]
        chosen[rows, order] = True
    elif policy == ROUND_ROBIN:
        chosen[:, (t * M + np.arange(m)) % N] = True
    elif policy == RANDOM_M:
        order = np.argsort(keys_now, axis=-1, kind="stable")[:, :m]
        chosen[rows, order] = True
    return chosen


def simulate_chunk_np(
    policy, M, t0, n_slots, warmup, gamma, err_tab, gain_tab, succ, fail, head_age,
    p, uniforms, keys, state, acc_err, acc_disc, sched_count, visits, max_sched,
):
    R, N = state.shape
    cols = np.arange(N)
    disc = gamma ** t0
    for k in range(n_slots):
        t = t0 + k
        e = err_tab[cols, state]
        acc_disc += disc * e.sum(axis=1)
        disc *= gamma
        if t >= warmup:
            acc_err += e.sum(axis=1)
        for n in range(N):
            np.add.at(visits[n], state[:, n], 1)
        keys_now = keys[:, k, :] if policy == RANDOM_M else None
        chosen = _select_np(policy, M, t, gain_tab[cols, state], head_age[state], keys_now)
        count = chosen.sum(axis=1)
        max_sched[0] = max(max_sched[0], int(count.max()))
        if t >= warmup:
            sched_count += chosen
        ok = chosen & (uniforms[:, k, :] < p)
        state[:] = np.where(ok, succ[state], fail[state])


# --------------------------------------------------------------------------
# loop-style implementations, compiled when numba is available


def value_iteration_loops(err, succ, fail, p, lam, gamma, v0, threshold, max_iter):
    S = err.shape[0]
    v = v0.copy()
    v_new = np.empty(S)
    q0 = np.empty(S)
    q1 = np.empty(S)
    residuals = np.empty(max_iter)
    n = max_iter
    for it in range(max_iter):
        res = 0.0
        for s in range(S):
            vf = v[fail[s]]
            a = err[s] + gamma * vf
            b = err[s] + lam + gamma * (p * v[succ[s]] + (1.0 - p) * vf)
            q0[s] = a
            q1[s] = b
            m = a if a <= b else b
            d = abs(m - v[s])
            if d > res:
                res = d
            v_new[s] = m
        v, v_new = v_new, v
        residuals[it] = res
        if res <= threshold:
            n = it + 1
            break
    return v, q0, q1, n, residuals[:n].copy()


def policy_evaluation_loops(reward, action, succ, fail, p, gamma, u0, threshold, max_iter):
    S = reward.shape[0]
    u = u0.copy()
    u_new = np.empty(S)
    for it in range(max_iter):
        res = 0.0
        for s in range(S):
            if action[s]:
                x = reward[s] + gamma * (p * u[succ[s]] + (1.0 - p) * u[fail[s]])
            else:
                x = reward[s] + gamma * u[fail[s]]
            d = abs(x - u[s])
            if d > res:
                res = d
            u_new[s] = x
        u, u_new = u_new, u
        if res <= threshold:
            return u, it + 1
    return u, max_iter


def _better(g1, h1, i1, g2, h2, i2):
    # MGF order: larger gain, then larger head age, then lower index
    if g1 != g2:
        return g1 > g2
    if h1 != h2:
        return h1 > h2
    return i1 < i2


def simulate_chunk_loops(
    policy, M, t0, n_slots, warmup, gamma, err_tab, gain_tab, succ, fail, head_age,
    p, uniforms, keys, state, acc_err, acc_disc, sched_count, visits, max_sched,
):
    R, N = state.shape
    m = min(M, N)
    chosen = np.zeros(N, dtype=np.bool_)
    for r in range(R):
        disc = gamma ** t0
        for k in range(n_slots):
            t = t0 + k
            tot = 0.0
            for n in range(N):
                s = state[r, n]
                tot += err_tab[n, s]
                visits[n, s] += 1
                chosen[n] = False
            acc_disc[r] += disc * tot
            disc *= gamma
            if t >= warmup:
                acc_err[r] += tot
            if policy == MGF:
                for j in range(m):
                    best = -1
                    for n in range(N):
                        if chosen[n]:
                            continue
                        s = state[r, n]
                        g = gain_tab[n, s]
                        if g < 0.0:
                            continue
                        if best < 0:
                            best = n
                        else:
                            sb = state[r, best]
                            if _better(g, head_age[s], n, gain_tab[best, sb], head_age[sb], best):
                                best = n
                    if best < 0:
                        break
                    chosen[best] = True
            elif policy == MAX_AGE:
                for j in range(m):
                    best = -1
                    for n in range(N):
                        if chosen[n]:
                            continue
                        if best < 0 or head_age[state[r, n]] > head_age[state[r, best]]:
                            best = n
                    chosen[best] = True
            elif policy == ROUND_ROBIN:
                for j in range(m):
                    chosen[(t * M + j) % N] = True
            elif policy == RANDOM_M:
                for j in range(m):
                    best = -1
                    for n in range(N):
                        if chosen[n]:
                            continue
                        if best < 0 or keys[r, k, n] < keys[r, k, best]:
                            best = n
                    chosen[best] = True
            count = 0
            for n in range(N):
                s = state[r, n]
                if chosen[n]:
                    count += 1
                    if t >= warmup:
                        sched_count[r, n] += 1
                    if uniforms[r, k, n] < p[n]:
                        state[r, n] = succ[s]
                    else:
                        state[r, n] = fail[s]
                else:
                    state[r, n] = fail[s]
            if count > max_sched[0]:
                max_sched[0] = count


if HAVE_NUMBA:
    _better = numba.njit(cache=True)(_better)
    value_iteration_nb = numba.njit(cache=True)(value_iteration_loops)
    policy_evaluation_nb = numba.njit(cache=True)(policy_evaluation_loops)
    simulate_chunk_nb = numba.njit(cache=True)(simulate_chunk_loops)
else:  # pragma: no cover
    value_iteration_nb = value_iteration_loops
    policy_evaluation_nb = policy_evaluation_loops
    simulate_chunk_nb = simulate_chunk_loops

if USE_JIT:
    value_iteration_kernel = value_iteration_nb
    policy_evaluation_kernel = policy_evaluation_nb
    simulate_chunk_kernel = simulate_chunk_nb
else:
    value_iteration_kernel = value_iteration_np
    policy_evaluation_kernel = policy_evaluation_np
    simulate_chunk_kernel = simulate_chunk_np


def backend() -> str:
    return "numba" if USE_JIT else "numpy"
