"""Level-2 placement game: candidate placements against direct-attack paths.

The operator (rows) minimizes the expected number of PMUs deployed and the
attacker (columns) maximizes it. Entry ``(i, j)`` plays the level-1 stopping
game for placement ``i`` under direct attack ``j``, then counts the PMUs
needed to restore observability from the compromise state at the stopping
stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np
from scipy.optimize import linprog

from .attack import RiskMatrix, compromise_outcomes, stage_states
from .estimation import DEFAULT_SIGMA
from .grid import GridTopology
from .observability import _feasible, min_placement, observable_placements
from .stage_game import GameSolution, PayoffModel, build_stage_payoffs, solve_stopping_game

MAX_ATTACK_PATH_PMUS = 12
SUPPORT_ENUMERATION_LIMIT = 6
_MAX_SUPPORT_PAIRS = 200_000


@dataclass(frozen=True)
class GameParams:
    stages: int = 5
    sigma: float = DEFAULT_SIGMA
    tau: float | None = None
    attack_budget: int = 1  # largest direct-attack set the attacker may pick
    slack: int = 2  # candidate placements up to min cardinality + slack


@dataclass(frozen=True)
class BilevelGame:
    placements: list
    attack_paths: list
    cost: np.ndarray
    p_hat: np.ndarray
    q_hat: np.ndarray
    expected_cost: float
    placement_marginals: np.ndarray
    attack_marginals: np.ndarray
    baseline_cost: int
    hardened_cost: float
    pure_minimax_cost: float
    labels: tuple = field(default=())


def enumerate_attack_paths(placement, limit: int = MAX_ATTACK_PATH_PMUS) -> list[np.ndarray]:
    """Every subset of the placed PMUs, by size then lexicographically."""
    placement = np.asarray(placement, dtype=bool)
    placed = np.flatnonzero(placement).tolist()
    if not placed:
        raise ValueError("placement has no PMUs")
    if len(placed) > limit:
        raise ValueError(f"{len(placed)} placed PMUs exceed the exhaustive limit of {limit}")
    out = []
    for r in range(len(placed) + 1):
        for combo in combinations(placed, r):
            m = np.zeros(placement.size, dtype=bool)
            m[list(combo)] = True
            out.append(m)
    return out


def attack_path_pool(n_buses: int, budget: int) -> list[np.ndarray]:
    """Direct-attack sets over all buses with at most ``budget`` targets."""
    return enumerate_attack_paths(np.ones(n_buses, dtype=bool), limit=n_buses)[
        : sum(comb(n_buses, r) for r in range(budget + 1))
    ]


def candidate_placements(topology: GridTopology, slack: int = 2) -> list[np.ndarray]:
    smallest = int(min_placement(topology)[0].sum())
    return observable_placements(topology, max_size=smallest + slack)


@dataclass(frozen=True)
class CostEntry:
    cost: float
    level1: GameSolution | None


def level1_cost(
    topology: GridTopology,
    placement: np.ndarray,
    direct: np.ndarray,
    risk: RiskMatrix,
    params: GameParams,
    model: PayoffModel,
) -> CostEntry:
    """Expected PMUs deployed once the level-1 game for this pair has been played.

    The compromise state used for the repair is the one at the stopping stage,
    or at the final stage if the stopping state is never reached.
    """
    placement = np.asarray(placement, dtype=bool)
    hit = np.asarray(direct, dtype=bool) & placement
    base = float(placement.sum())
    if not np.any(hit):
        return CostEntry(base, None)
    pay = build_stage_payoffs(
        topology, placement, risk, hit, params.stages, params.tau, params.sigma, model
    )
    sol = solve_stopping_game(pay)
    states = stage_states(placement, hit, risk, params.stages)
    weights = list(sol.stop_probability)
    weights[-1] += sol.survival
    extra = 0.0
    for w, state in zip(weights, states):
        if w == 0.0:
            continue
        for C, pc in compromise_outcomes(state.prob, placement, hit):
            extra += w * pc * float(model.repair(placement, C).sum())
    return CostEntry(base + extra, sol)


def build_cost_matrix(
    topology: GridTopology,
    placements,
    attack_paths,
    risk: RiskMatrix,
    params: GameParams = GameParams(),
    model: PayoffModel | None = None,
) -> np.ndarray:
    model = model or PayoffModel(topology, params.sigma, params.tau)
    cost = np.empty((len(placements), len(attack_paths)))
    for i, P in enumerate(placements):
        for j, D in enumerate(attack_paths):
            cost[i, j] = level1_cost(topology, P, D, risk, params, model).cost
    return cost


def dominance_reduce(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Iteratively drop strictly dominated rows (minimizer) and columns (maximizer).

    Returns the surviving row and column indices.
    """
    rows = np.arange(cost.shape[0])
    cols = np.arange(cost.shape[1])
    changed = True
    while changed:
        changed = False
        sub = cost[np.ix_(rows, cols)]
        keep = [
            i for i in range(len(rows))
            if not any(np.all(sub[k] < sub[i]) for k in range(len(rows)) if k != i)
        ]
        if len(keep) < len(rows):
            rows = rows[keep]
            changed = True
            sub = cost[np.ix_(rows, cols)]
        keep = [
            j for j in range(len(cols))
            if not any(np.all(sub[:, k] > sub[:, j]) for k in range(len(cols)) if k != j)
        ]
        if len(keep) < len(cols):
            cols = cols[keep]
            changed = True
    return rows, cols


def _support_enumeration(C: np.ndarray, tol: float = 1e-9):
    """Shapley-Snow kernels: square nonsingular submatrices with equalizing strategies."""
    m, n = C.shape
    for k in range(1, min(m, n) + 1):
        for I in combinations(range(m), k):
            for J in combinations(range(n), k):
                sub = C[np.ix_(I, J)]
                A = np.zeros((k + 1, k + 1))
                A[:k, :k] = sub.T
                A[:k, k] = -1.0
                A[k, :k] = 1.0
                b = np.zeros(k + 1)
                b[k] = 1.0
                B = np.zeros((k + 1, k + 1))
                B[:k, :k] = sub
                B[:k, k] = -1.0
                B[k, :k] = 1.0
                try:
                    xp = np.linalg.solve(A, b)
                    xq = np.linalg.solve(B, b)
                except np.linalg.LinAlgError:
                    continue
                pI, v = xp[:k], xp[k]
                qJ, w = xq[:k], xq[k]
                if np.any(pI < -tol) or np.any(qJ < -tol) or abs(v - w) > 1e-7 * max(1.0, abs(v)):
                    continue
                p = np.zeros(m)
                p[list(I)] = np.clip(pI, 0, None)
                q = np.zeros(n)
                q[list(J)] = np.clip(qJ, 0, None)
                p /= p.sum()
                q /= q.sum()
                # operator (rows) minimizes: no column may beat v against p,
                # attacker (columns) maximizes: no row may undercut v against q
                if np.max(p @ C) <= v + 1e-9 * max(1.0, abs(v)) and np.min(C @ q) >= v - 1e-9 * max(1.0, abs(v)):
                    return p, q, float(p @ C @ q)
    return None


def _lp_solve(C: np.ndarray):
    m, n = C.shape
    # operator: min v  s.t.  C' p <= v, sum p = 1, p >= 0
    res = linprog(
        np.r_[np.zeros(m), 1.0],
        A_ub=np.c_[C.T, -np.ones(n)],
        b_ub=np.zeros(n),
        A_eq=np.r_[np.ones(m), 0.0][None, :],
        b_eq=[1.0],
        bounds=[(0, None)] * m + [(None, None)],
        method="highs",
    )
    # attacker: max w  s.t.  C q >= w, sum q = 1, q >= 0
    res2 = linprog(
        np.r_[np.zeros(n), -1.0],
        A_ub=np.c_[-C, np.ones(m)],
        b_ub=np.zeros(m),
        A_eq=np.r_[np.ones(n), 0.0][None, :],
        b_eq=[1.0],
        bounds=[(0, None)] * n + [(None, None)],
        method="highs",
    )
    if res.status != 0 or res2.status != 0:
        raise ArithmeticError(f"matrix game LP failed: {res.message} / {res2.message}")
    p = np.clip(res.x[:m], 0, None)
    q = np.clip(res2.x[:n], 0, None)
    p /= p.sum()
    q /= q.sum()
    return p, q, float(res.x[m])


def solve_matrix_game(cost) -> tuple[np.ndarray, np.ndarray, float]:
    """Zero-sum equilibrium; rows minimize the entry, columns maximize it.

    Strictly dominated actions are removed first. Small games are solved
    exactly by support enumeration, larger ones as a linear program.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.size == 0:
        raise ValueError("cost matrix must be a non-empty 2-D array")
    m, n = C.shape
    if np.ptp(C) == 0 and np.all(np.isfinite(C)):
        return np.full(m, 1.0 / m), np.full(n, 1.0 / n), float(C.flat[0])
    rows, cols = dominance_reduce(C)
    sub = C[np.ix_(rows, cols)]
    if not np.all(np.isfinite(sub)):
        raise ValueError("infinite entries survive dominance reduction")
    k = min(sub.shape)
    result = None
    if k <= SUPPORT_ENUMERATION_LIMIT:
        pairs = sum(comb(sub.shape[0], r) * comb(sub.shape[1], r) for r in range(1, k + 1))
        if pairs <= _MAX_SUPPORT_PAIRS:
            result = _support_enumeration(sub)
    if result is None:
        result = _lp_solve(sub)
    ps, qs, value = result
    p = np.zeros(m)
    q = np.zeros(n)
    p[rows] = ps
    q[cols] = qs
    return p, q, value


def hardened_placement(topology: GridTopology, attack_paths) -> np.ndarray | None:
    """Smallest placement that stays observable under every direct-attack path.

    Ties go to the lexicographically first placement; ``None`` when no
    placement survives every path.
    """
    n = topology.n_buses
    for r in range(1, n + 1):
        for combo in combinations(range(n), r):
            P = np.zeros(n, dtype=bool)
            P[list(combo)] = True
            if all(_feasible(topology, P & ~np.asarray(D, dtype=bool)) for D in attack_paths):
                return P
    return None


def solve_bilevel(
    topology: GridTopology,
    risk: RiskMatrix,
    params: GameParams = GameParams(),
    placements=None,
    attack_paths=None,
) -> BilevelGame:
    model = PayoffModel(topology, params.sigma, params.tau)
    if placements is None:
        placements = candidate_placements(topology, params.slack)
    if attack_paths is None:
        attack_paths = attack_path_pool(topology.n_buses, params.attack_budget)
    placements = [np.asarray(P, dtype=bool) for P in placements]
    attack_paths = [np.asarray(D, dtype=bool) for D in attack_paths]
    cost = build_cost_matrix(topology, placements, attack_paths, risk, params, model)
    p, q, value = solve_matrix_game(cost)
    y_marg = np.sum([pi * P for pi, P in zip(p, placements)], axis=0)
    a_marg = np.sum([qj * D for qj, D in zip(q, attack_paths)], axis=0)
    hard = hardened_placement(topology, attack_paths)
    return BilevelGame(
        placements=placements,
        attack_paths=attack_paths,
        cost=cost,
        p_hat=p,
        q_hat=q,
        expected_cost=value,
        placement_marginals=y_marg,
        attack_marginals=a_marg,
        baseline_cost=int(min_placement(topology)[0].sum()),
        hardened_cost=float(hard.sum()) if hard is not None else float("inf"),
        pure_minimax_cost=float(cost.max(axis=1).min()),
        labels=topology.labels,
    )
