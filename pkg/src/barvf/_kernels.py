"""Compiled inner loops. Everything here works on validated float64 arrays."""

import numpy as np
from numba import njit

MARGINAL_FLOOR = 1e-300


@njit(cache=True)
def ba_iterate(dist, weights, beta, max_iter, tol, history):
    """Alternate channel / marginal updates until the Lagrangian settles.

    ``history`` must have length ``max_iter``; entry ``t`` receives the
    objective after iteration ``t``. Returns
    ``(conditional, marginal, rate, distortion, n_iter, converged)``.
    """
    n_src, n_act = dist.shape
    log_q = np.full(n_act, -np.log(n_act))
    active = np.ones(n_act, dtype=np.bool_)
    cond = np.empty((n_src, n_act))
    q = np.empty(n_act)
    logits = np.empty(n_act)

    prev = np.inf
    rate = 0.0
    distortion = 0.0
    n_iter = 0
    converged = False
    for it in range(max_iter):
        for z in range(n_src):
            top = -np.inf
            for a in range(n_act):
                if active[a]:
                    logits[a] = log_q[a] - beta * dist[z, a]
                    if logits[a] > top:
                        top = logits[a]
            total = 0.0
            for a in range(n_act):
                if active[a]:
                    e = np.exp(logits[a] - top)
                    cond[z, a] = e
                    total += e
                else:
                    cond[z, a] = 0.0
            for a in range(n_act):
                cond[z, a] /= total

        q_total = 0.0
        for a in range(n_act):
            s = 0.0
            for z in range(n_src):
                s += weights[z] * cond[z, a]
            q[a] = s
            q_total += s
        for a in range(n_act):
            q[a] /= q_total
            if q[a] < MARGINAL_FLOOR:
                # drop the action; whatever denormal mass rows still put on it goes too
                q[a] = 0.0
                active[a] = False
                log_q[a] = -np.inf
                for z in range(n_src):
                    cond[z, a] = 0.0
            else:
                log_q[a] = np.log(q[a])

        rate = 0.0
        distortion = 0.0
        for z in range(n_src):
            rz = 0.0
            dz = 0.0
            for a in range(n_act):
                c = cond[z, a]
                if c > 0.0:
                    rz += c * (np.log(c) - log_q[a])
                    dz += c * dist[z, a]
            rate += weights[z] * rz
            distortion += weights[z] * dz
        if rate < 0.0:
            rate = 0.0

        obj = rate + beta * distortion
        history[it] = obj
        n_iter = it + 1
        if abs(prev - obj) < tol:
            converged = True
            break
        prev = obj

    return cond, q, rate, distortion, n_iter, converged
