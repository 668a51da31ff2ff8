"""Topological observability with zero-injection buses.

A load bus is observed when at least one healthy PMU sits in its closed
neighbourhood (the bus itself or an adjacent bus). Each zero-injection bus
must be credited to exactly one healthy PMU in its closed neighbourhood, and
a PMU can be credited to at most one zero-injection bus; feasibility of that
assignment is a bipartite matching problem. Buses that are neither load nor
zero-injection carry no requirement.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterator

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .grid import GridTopology

MAX_EXHAUSTIVE_BUSES = 20


class SearchSizeError(ValueError):
    """Exhaustive search requested on a grid that is too large."""


@dataclass(frozen=True)
class ObservabilityAssignment:
    placement: np.ndarray
    u: np.ndarray  # u[i, k]: PMU at k credited to zero-injection bus i
    f: np.ndarray  # healthy PMUs in the closed neighbourhood of each bus
    z_flags: np.ndarray  # zero-injection constraint met (True for other buses)


def _as_mask(v, n: int, name: str) -> np.ndarray:
    if v is None:
        return np.zeros(n, dtype=bool)
    v = np.asarray(v, dtype=bool)
    if v.shape != (n,):
        raise ValueError(f"{name} must have length {n}")
    return v


def _match_zero_injection(topology: GridTopology, healthy: np.ndarray) -> np.ndarray:
    """Column index matched to each zero-injection bus, -1 where unmatched."""
    zi = np.flatnonzero(topology.zero_injection)
    if zi.size == 0:
        return np.zeros(0, dtype=int)
    bi = topology.closed_adjacency[zi] & healthy[None, :]
    return maximum_bipartite_matching(csr_matrix(bi.astype(np.int8)), perm_type="column")


def _feasible(topology: GridTopology, healthy: np.ndarray) -> bool:
    f = topology.closed_adjacency[topology.load] @ healthy
    if not np.all(f):
        return False
    return bool(np.all(_match_zero_injection(topology, healthy) >= 0))


def check_observable(
    topology: GridTopology, placement, compromised=None
) -> tuple[bool, ObservabilityAssignment]:
    """Check observability counting only non-compromised PMUs.

    Returns the verdict and a witness assignment. When infeasible the
    assignment is the best partial one (maximum matching).
    """
    n = topology.n_buses
    placement = _as_mask(placement, n, "placement")
    compromised = _as_mask(compromised, n, "compromised")
    healthy = placement & ~compromised

    f = topology.closed_adjacency.astype(int) @ healthy.astype(int)
    u = np.zeros((n, n), dtype=bool)
    z_flags = np.ones(n, dtype=bool)
    zi = np.flatnonzero(topology.zero_injection)
    match = _match_zero_injection(topology, healthy)
    for i, k in zip(zi, match):
        if k >= 0:
            u[i, k] = True
        else:
            z_flags[i] = False

    ok = bool(np.all(f[topology.load] >= 1) and np.all(z_flags))
    return ok, ObservabilityAssignment(placement.copy(), u, f, z_flags)


def _subsets(pool: np.ndarray, size: int) -> Iterator[tuple[int, ...]]:
    return combinations(pool.tolist(), size)


def _guard(topology: GridTopology, limit: int) -> None:
    if topology.n_buses > limit:
        raise SearchSizeError(
            f"exhaustive search over 2^{topology.n_buses} placements exceeds the {limit}-bus limit"
        )


def observable_placements(
    topology: GridTopology, max_size: int | None = None, limit: int = MAX_EXHAUSTIVE_BUSES
) -> list[np.ndarray]:
    """All observable placements with at most ``max_size`` PMUs, by size then lexicographically."""
    _guard(topology, limit)
    n = topology.n_buses
    max_size = n if max_size is None else min(max_size, n)
    out = []
    buses = np.arange(n)
    for r in range(1, max_size + 1):
        for combo in _subsets(buses, r):
            mask = np.zeros(n, dtype=bool)
            mask[list(combo)] = True
            if _feasible(topology, mask):
                out.append(mask)
    return out


def min_placement(topology: GridTopology, limit: int = MAX_EXHAUSTIVE_BUSES) -> list[np.ndarray]:
    """Every minimum-cardinality observable placement, lexicographically sorted."""
    _guard(topology, limit)
    n = topology.n_buses
    buses = np.arange(n)
    for r in range(1, n + 1):
        found = []
        for combo in _subsets(buses, r):
            mask = np.zeros(n, dtype=bool)
            mask[list(combo)] = True
            if _feasible(topology, mask):
                found.append(mask)
        if found:
            return found
    return []


def repair_placement(
    topology: GridTopology,
    placement,
    compromised=None,
    score: Callable[[np.ndarray], float] | None = None,
) -> np.ndarray:
    """Fewest new PMUs restoring observability after losing the compromised ones.

    New units may go on any bus without a healthy PMU, including a bus whose
    PMU is compromised (the unit is replaced). Among minimum repairs the one
    with the smallest ``score(placement | additions)`` wins, then the
    lexicographically first. Returns the mask of added units.
    """
    n = topology.n_buses
    placement = _as_mask(placement, n, "placement")
    compromised = _as_mask(compromised, n, "compromised")
    healthy = placement & ~compromised
    if _feasible(topology, healthy):
        return np.zeros(n, dtype=bool)
    pool = np.flatnonzero(~healthy)
    for r in range(1, pool.size + 1):
        best, best_score = None, None
        for combo in _subsets(pool, r):
            add = np.zeros(n, dtype=bool)
            add[list(combo)] = True
            if not _feasible(topology, healthy | add):
                continue
            if score is None:
                return add
            s = score(placement | add)
            if best is None or s < best_score:
                best, best_score = add, s
        if best is not None:
            return best
    # placing a unit on every bus always satisfies the constraints
    raise AssertionError("unreachable: full placement is observable")


def prob_observability(topology: GridTopology, placement, attack_prob, beta) -> np.ndarray:
    """Per-bus probabilistic observability term ``1 - Pr(direct_i) * prod_j beta_ij``.

    The product runs over the other placed PMUs ``j``; buses without a PMU
    cannot be attacked directly and score 1.
    """
    n = topology.n_buses
    placement = _as_mask(placement, n, "placement")
    attack_prob = np.asarray(attack_prob, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if attack_prob.shape != (n,) or beta.shape != (n, n):
        raise ValueError("attack_prob must be length n_b and beta n_b x n_b")
    if np.any((attack_prob < 0) | (attack_prob > 1)) or np.any((beta < 0) | (beta > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    out = np.ones(n)
    for i in np.flatnonzero(placement):
        others = placement.copy()
        others[i] = False
        out[i] = 1.0 - attack_prob[i] * np.prod(beta[i, others])
    return out


def prob_observability_total(topology: GridTopology, placement, attack_prob, beta) -> float:
    """Network aggregate: the sum of the per-bus terms."""
    return float(prob_observability(topology, placement, attack_prob, beta).sum())
