"""Random instance generators and independent oracles for the test-suite.

Nothing here calls into the solver code paths it is used to check; oracles
use plain loops, itertools and generic numpy/scipy primitives.
"""

from __future__ import annotations

from itertools import combinations, permutations

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from pmugame.grid import make_topology


# ---------------------------------------------------------------- instances


def random_grid(rng: np.random.Generator, n_min=2, n_max=8, zi_prob=0.15, unmon_prob=0.1):
    """Connected random grid with random bus kinds and admittances."""
    n = int(rng.integers(n_min, n_max + 1))
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    for _ in range(int(rng.integers(0, n))):
        a, b = rng.choice(n, 2, replace=False)
        edges.add((int(min(a, b)), int(max(a, b))))
    branches = []
    for a, b in sorted(edges):
        if rng.random() < 0.5:
            a, b = b, a
        y = complex(rng.uniform(0.2, 3.0), -rng.uniform(3.0, 20.0))
        branches.append((a, b, y))
    kind = rng.random(n)
    zi = kind < zi_prob
    unmon = (kind >= zi_prob) & (kind < zi_prob + unmon_prob)
    load = ~zi & ~unmon
    if not np.any(load | zi):
        load[0] = True
        zi[0] = False
    return make_topology(n, branches, load=load, zero_injection=zi)


def random_observable_placement(rng, topology):
    """Random subset grown bus by bus until it is observable."""
    n = topology.n_buses
    P = rng.random(n) < rng.uniform(0.1, 0.6)
    for k in rng.permutation(n):
        if observable_oracle(topology, P):
            break
        P[k] = True
    assert observable_oracle(topology, P)
    return P


# ---------------------------------------------------------------- observability


def _neighbourhood(topology, i):
    nb = {i}
    for br in topology.branches:
        if br.from_bus == i:
            nb.add(br.to_bus)
        elif br.to_bus == i:
            nb.add(br.from_bus)
    return nb


def observable_oracle(topology, placement, compromised=None):
    """Brute force: load coverage by set lookups, zero-injection credit by trying every injection."""
    n = topology.n_buses
    healthy = {k for k in range(n) if placement[k] and not (compromised is not None and compromised[k])}
    for i in range(n):
        if topology.load[i] and not (_neighbourhood(topology, i) & healthy):
            return False
    zi = [i for i in range(n) if topology.zero_injection[i]]
    if not zi:
        return True
    pmus = sorted(healthy)
    if len(pmus) < len(zi):
        return False
    for perm in permutations(pmus, len(zi)):
        if all(k in _neighbourhood(topology, i) for i, k in zip(zi, perm)):
            return True
    return False


def min_placement_oracle(topology):
    n = topology.n_buses
    for r in range(1, n + 1):
        found = []
        for combo in combinations(range(n), r):
            P = np.zeros(n, dtype=bool)
            P[list(combo)] = True
            if observable_oracle(topology, P):
                found.append(combo)
        if found:
            return found
    return []


def min_repair_oracle(topology, placement, compromised):
    """Smallest number of units to add (on buses without a healthy PMU) to regain observability."""
    n = topology.n_buses
    healthy = np.asarray(placement, bool) & ~np.asarray(compromised, bool)
    pool = [k for k in range(n) if not healthy[k]]
    for r in range(len(pool) + 1):
        for combo in combinations(pool, r):
            P = healthy.copy()
            P[list(combo)] = True
            if observable_oracle(topology, P):
                return r
    raise AssertionError("full placement must be observable")


# ---------------------------------------------------------------- linear algebra


def full_pivot_solve(A, b):
    """Gaussian elimination with complete pivoting."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    cols = list(range(n))
    for k in range(n):
        sub = np.abs(A[k:, k:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        i += k
        j += k
        A[[k, i]] = A[[i, k]]
        b[[k, i]] = b[[i, k]]
        A[:, [k, j]] = A[:, [j, k]]
        cols[k], cols[j] = cols[j], cols[k]
        for r in range(k + 1, n):
            f = A[r, k] / A[k, k]
            A[r, k:] -= f * A[k, k:]
            b[r] -= f * b[k]
    y = np.zeros(n)
    for k in range(n - 1, -1, -1):
        y[k] = (b[k] - A[k, k + 1:] @ y[k + 1:]) / A[k, k]
    x = np.zeros(n)
    x[cols] = y
    return x


def dense_gain(ms):
    """``H' R^-1 H`` over available rows, by direct multiplication."""
    rows = ms.availability
    H = ms.H[rows]
    return H.T @ np.diag(1.0 / np.diag(ms.R)[rows]) @ H


# ---------------------------------------------------------------- attack


def attack_matrices(ms, compromised):
    """Dense detector and distortion maps built from scratch.

    Returns ``(rows, Gc, S, F)`` where ``S`` maps the compromised-row injection
    to the detector's shift on touched state components and ``F`` to the full
    estimator's shift.
    """
    owner_hit = np.asarray(compromised, bool)[ms.owner] & ms.availability
    rows = np.flatnonzero(owner_hit)
    w = 1.0 / np.diag(ms.R)
    Hs = ms.H[rows]
    touched = np.flatnonzero(np.abs(Hs).sum(axis=0) > 0)
    Ht = Hs[:, touched]
    Gc = Ht.T @ (w[rows, None] * Ht)
    S = np.linalg.inv(Gc) @ (Ht.T * w[rows])
    G = dense_gain(ms)
    F = np.linalg.inv(G) @ (Hs.T * w[rows])
    return rows, Gc, S, F


def statistic_oracle(ms, compromised, a):
    rows, Gc, S, _ = attack_matrices(ms, compromised)
    dx = S @ a[rows]
    return float(np.sqrt(max(dx @ Gc @ dx, 0.0)))


def projected_gradient_oracle(ms, compromised, tau, starts=100, iters=4000, seed=0):
    """Best objective over random starts of projected gradient ascent.

    Maximizes ``||F a||^2`` over ``sqrt(dx' Gc dx) = tau``; each step follows the
    gradient of the Rayleigh quotient with a backtracking step size, then
    retracts radially onto the constraint surface.
    """
    rows, Gc, S, F = attack_matrices(ms, compromised)
    Q = S.T @ Gc @ S  # detector quadratic form in injection space
    P = F.T @ F
    # injections invisible to both maps add nothing; drop them
    Z = null_space(Q, rcond=1e-12)
    if Z.size:
        basis = null_space(Z.T)
        Q = basis.T @ Q @ basis
        P = basis.T @ P @ basis
    k = Q.shape[0]
    if k == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((starts, k))

    def rayleigh(A):
        return np.einsum("si,ij,sj->s", A, P, A) / np.einsum("si,ij,sj->s", A, Q, A)

    rho = rayleigh(A)
    eta0 = np.linalg.norm(Q, 2) / max(np.linalg.norm(P, 2), 1e-300)
    eta = np.full(starts, eta0)
    for _ in range(iters):
        qa = np.einsum("si,ij,sj->s", A, Q, A)
        grad = 2.0 * (A @ P - rho[:, None] * (A @ Q)) / qa[:, None]
        trial = A + eta[:, None] * grad
        trial /= np.sqrt(np.einsum("si,ij,sj->s", trial, Q, trial))[:, None]
        r_new = rayleigh(trial)
        better = r_new >= rho
        A = np.where(better[:, None], trial, A)
        rho = np.where(better, r_new, rho)
        eta = np.clip(np.where(better, eta * 1.5, eta * 0.5), 1e-12 * eta0, 1e12 * eta0)
    return float(rho.max() * tau**2)


# ---------------------------------------------------------------- games


def support_enumeration_2x2(M):
    """All equilibria of a 2x2 zero-sum game (row maximizes), as ``(p, q, value)`` tuples."""
    M = np.asarray(M, dtype=float)
    out = []
    for i in range(2):
        for j in range(2):
            if M[i, j] >= M[1 - i, j] and M[i, j] <= M[i, 1 - j]:
                p = np.eye(2)[i]
                q = np.eye(2)[j]
                out.append((p, q, M[i, j]))
    if out:
        return out
    A = np.array([[M[0, 0] - M[0, 1], M[1, 0] - M[1, 1]], [1.0, 1.0]])
    p = np.linalg.solve(A, [0.0, 1.0])
    B = np.array([[M[0, 0] - M[1, 0], M[0, 1] - M[1, 1]], [1.0, 1.0]])
    q = np.linalg.solve(B, [0.0, 1.0])
    return [(p, q, float(p @ M @ q))]


def lp_game_value(C):
    """Value of the zero-sum game with the row player minimizing, via the shifted LP."""
    C = np.asarray(C, dtype=float)
    shift = C.min() - 1.0
    Cp = C - shift
    m, n = C.shape
    # x = p / v with v the (positive) value: max sum x  s.t.  Cp' x <= 1
    res = linprog(-np.ones(m), A_ub=Cp.T, b_ub=np.ones(n), bounds=[(0, None)] * m, method="highs")
    assert res.status == 0
    return 1.0 / res.x.sum() + shift


def tree_grid_value_k2(stage1, stage2, step=1e-3):
    """Brute-force value of a two-stage stopping game over a strategy grid.

    The continuation of stage 1 is reached with probability ``1 - p1 q1`` and
    is worth the stage-2 maximin; both maximins are taken over the grid.
    """
    g = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)

    def maximin(M):
        # expected payoff for row prob p and column prob q, minimized over q per p
        a, b = M[0]
        c, d = M[1]
        # bilinear in (p, q): evaluate on grid and take max_p min_q
        P = g[:, None]
        Q = g[None, :]
        J = P * Q * a + P * (1 - Q) * b + (1 - P) * Q * c + (1 - P) * (1 - Q) * d
        return J.min(axis=1).max()

    s2 = stage2
    w = maximin(np.array([[s2[0], s2[1]], [s2[2], s2[3]]]))
    s1 = stage1
    M1 = np.array([[s1[0], s1[1] + w], [s1[2] + w, s1[3] + w]])
    return float(maximin(M1))


# ---------------------------------------------------------------- propagation


def monte_carlo_propagation(placement, direct, beta, stages, trials, seed=0, chunk=200_000):
    """Simulated compromise frequencies per stage, one Bernoulli draw per infected-healthy pair."""
    rng = np.random.default_rng(seed)
    n = len(placement)
    b = np.array(beta, dtype=float)
    np.fill_diagonal(b, 0.0)
    b[:, ~np.asarray(placement, bool)] = 0.0
    counts = np.zeros((stages, n))
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        X = np.zeros((m, n), dtype=bool)
        X[:, np.asarray(direct, bool) & np.asarray(placement, bool)] = True
        counts[0] += X.sum(axis=0)
        for k in range(1, stages):
            new = X.copy()
            for i in range(n):
                src = X[:, i]
                if not src.any():
                    continue
                hit = rng.random((m, n)) < b[i][None, :]
                new |= src[:, None] & hit
            X = new
            counts[k] += X.sum(axis=0)
        done += m
    return counts / trials
