"""Compiled event loop for priority/threshold policies.

It performs the same floating-point operations in the same order as the
pure-Python engine in :mod:`bcplab.simulator`, so both produce identical
trajectories from the same variates (checked by the test suite).
"""
import numpy as np
from numba import njit

OK, DEADLOCK, FULL, EXHAUSTED = 0, 1, 2, 3


@njit(cache=True)
def tie_tol(t):
    return 1e-12 * max(1.0, abs(t))


@njit(cache=True)
def run_priority(q0, horizon, table, order, levels, buffer_of,
                 U, n_u, V, n_v, D, n_d,
                 times, Q, T, E, S, Phi, alloc, res_u, res_v, fired_a, fired_c):
    """Fill the record arrays; return ``(num_records, status)``.

    ``U[i, :n_u[i]]`` are interarrival times, ``V[j, :n_v[j]]`` service
    times and ``D[j, :n_d[j]]`` routing destinations (0 = exit, i + 1 =
    buffer i).  ``table[i, k]`` is the activity linking buffer i to server k.
    """
    I, K = table.shape
    Ip = U.shape[0]
    J = V.shape[0]
    cap = times.shape[0]

    q = q0.copy()
    t_cum = np.zeros(J)
    e = np.zeros(I, np.int64)
    s = np.zeros(J, np.int64)
    phi = np.zeros((I, J), np.int64)
    arr_abs = np.empty(Ip)
    svc_abs = np.full(J, np.inf)
    svc_rem = np.empty(J)
    a_prev = np.zeros(J, np.int8)
    a = np.zeros(J, np.int8)
    spare = np.zeros(I, np.int64)
    for i in range(Ip):
        if n_u[i] < 1:
            return 0, EXHAUSTED
        arr_abs[i] = U[i, 0]
    for j in range(J):
        if n_v[j] < 1:
            return 0, EXHAUSTED
        svc_rem[j] = V[j, 0]
    now = 0.0
    ell = 0
    while True:
        if ell >= cap:
            return ell, FULL
        times[ell] = now
        for i in range(Ip):
            res_u[ell, i] = arr_abs[i] - now
        for j in range(J):
            res_v[ell, j] = svc_abs[j] - now if a_prev[j] == 1 else svc_rem[j]

        # policy decision
        for j in range(J):
            a[j] = 0
        for i in range(I):
            spare[i] = q[i]
        for k in range(K):
            for idx in range(I):
                i = order[idx]
                j = table[i, k]
                if j >= 0 and q[i] > levels[i] and spare[i] > 0:
                    a[j] = 1
                    spare[i] -= 1
                    break
        for j in range(J):
            if a[j] == 1 and a_prev[j] == 0:
                svc_abs[j] = now + svc_rem[j]
            elif a[j] == 0 and a_prev[j] == 1:
                svc_rem[j] = svc_abs[j] - now
        for i in range(I):
            Q[ell, i] = q[i]
            E[ell, i] = e[i]
            for j in range(J):
                Phi[ell, i, j] = phi[i, j]
        for j in range(J):
            T[ell, j] = t_cum[j]
            S[ell, j] = s[j]
            alloc[ell, j] = a[j]

        t_next = np.inf
        for i in range(Ip):
            if arr_abs[i] < t_next:
                t_next = arr_abs[i]
        for j in range(J):
            if a[j] == 1 and svc_abs[j] < t_next:
                t_next = svc_abs[j]
        if t_next == np.inf:
            return ell + 1, DEADLOCK
        if t_next > horizon:
            return ell + 1, OK
        if ell + 1 >= cap:
            return ell + 1, FULL
        tol = tie_tol(t_next)
        dt = t_next - now
        for j in range(J):
            if a[j] == 1:
                t_cum[j] = t_cum[j] + dt
        now = t_next
        nxt = ell + 1
        for i in range(Ip):
            fired_a[nxt, i] = False
            if arr_abs[i] <= t_next + tol:
                fired_a[nxt, i] = True
                e[i] += 1
                q[i] += 1
                if e[i] >= n_u[i]:
                    return nxt, EXHAUSTED
                arr_abs[i] = arr_abs[i] + U[i, e[i]]
        for j in range(J):
            fired_c[nxt, j] = False
            if a[j] == 1 and svc_abs[j] <= t_next + tol:
                fired_c[nxt, j] = True
                if s[j] >= n_d[j]:
                    return nxt, EXHAUSTED
                d = D[j, s[j]]
                s[j] += 1
                q[buffer_of[j]] -= 1
                if d > 0:
                    q[d - 1] += 1
                    phi[d - 1, j] += 1
                if s[j] >= n_v[j]:
                    return nxt, EXHAUSTED
                svc_abs[j] = now + V[j, s[j]]
        for j in range(J):
            a_prev[j] = a[j]
        ell = nxt
