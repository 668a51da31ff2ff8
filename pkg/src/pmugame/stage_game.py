"""Level-1 stopping game between the attacker and the grid operator.

Each stage is a 2x2 zero-sum game. Rows are the attacker's actions
(Attack, No Attack), columns the operator's (Optimize, No Optimize); entries
are payoffs to the attacker, who maximizes. The pair (Attack, Optimize) is the
stopping state and ends the game; every other pair continues to the next
stage, so the backward step is

    V_{k-1} = Val([[s11,       s12 + V_k],
                   [s21 + V_k, s22 + V_k]])

with ``V_K = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attack import RiskMatrix, compromise_outcomes, default_tau, design_attack, stage_states
from .estimation import DEFAULT_SIGMA, build_measurement_system, gain_matrix, log_phi_d_of_gain
from .grid import GridTopology
from .observability import repair_placement


@dataclass(frozen=True)
class StagePayoff:
    s11: float  # (Attack, Optimize)
    s12: float  # (Attack, No Optimize)
    s21: float  # (No Attack, Optimize)
    s22: float  # (No Attack, No Optimize)

    def matrix(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s21, self.s22]], dtype=float)


@dataclass(frozen=True)
class GameSolution:
    """Backward-induction solution of the stopping game.

    ``values[k]`` is the value of the game still to be played after stage
    ``k`` (``values[0]`` is the game value, ``values[K] == 0``).
    ``attacker_policies[k-1] = (Pr Attack, Pr No Attack)`` and
    ``operator_policies[k-1] = (Pr Optimize, Pr No Optimize)`` at stage ``k``.
    ``stop_probability[k-1]`` is the chance the stopping state is reached at
    stage ``k``; ``survival`` is the chance it is never reached.
    """

    K: int
    values: tuple[float, ...]
    attacker_policies: tuple[tuple[float, float], ...]
    operator_policies: tuple[tuple[float, float], ...]
    stop_probability: tuple[float, ...]
    survival: float
    interior: tuple[bool, ...] = field(default=())

    @property
    def value(self) -> float:
        return self.values[0]


def _pure_saddle(M: np.ndarray):
    for i in range(2):
        for j in range(2):
            if M[i, j] == M[i].min() and M[i, j] == M[:, j].max():
                return i, j
    return None


def _unit(i: int) -> np.ndarray:
    e = np.zeros(2)
    e[i] = 1.0
    return e


def solve_2x2(M) -> tuple[np.ndarray, np.ndarray, float]:
    """Equilibrium of a 2x2 zero-sum game; the row player maximizes.

    Returns ``(p, q, value)`` with ``p`` the row strategy and ``q`` the
    column strategy. A pure saddle point is preferred when one exists;
    otherwise the indifference solution

        p1 = (m22 - m21) / D,   q1 = (m22 - m12) / D,   value = det(M) / D,
        D = m11 - m21 - m12 + m22.

    Infinite entries are resolved by dominance: a column holding ``+inf`` is
    never played by the minimizer while a finite column exists.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    if np.any(np.isnan(M)):
        raise ValueError("payoff matrix contains NaN")

    saddle = _pure_saddle(M)
    if saddle is not None:
        i, j = saddle
        return _unit(i), _unit(j), float(M[i, j])

    if not np.all(np.isfinite(M)):
        cols = [j for j in range(2) if not np.any(M[:, j] == np.inf)]
        rows = [i for i in range(2) if not np.any(M[i] == -np.inf)]
        if len(cols) == 1:
            j = cols[0]
            i = int(np.argmax(M[:, j]))
            return _unit(i), _unit(j), float(M[i, j])
        if len(rows) == 1:
            i = rows[0]
            j = int(np.argmin(M[i]))
            return _unit(i), _unit(j), float(M[i, j])
        raise ArithmeticError(f"cannot resolve infinite payoffs in {M.tolist()}")

    (m11, m12), (m21, m22) = M
    D = m11 - m21 - m12 + m22
    if D == 0.0:
        # a 2x2 game without a pure saddle always has D != 0
        raise ArithmeticError(f"degenerate 2x2 game without saddle point: {M.tolist()}")
    p1 = (m22 - m21) / D
    q1 = (m22 - m12) / D
    value = (m11 * m22 - m12 * m21) / D
    p1 = min(max(p1, 0.0), 1.0)
    q1 = min(max(q1, 0.0), 1.0)
    return np.array([p1, 1.0 - p1]), np.array([q1, 1.0 - q1]), float(value)


def stage_matrix(s: StagePayoff, continuation: float) -> np.ndarray:
    """Stage payoffs plus continuation; (Attack, Optimize) is terminal."""
    return np.array(
        [[s.s11, s.s12 + continuation], [s.s21 + continuation, s.s22 + continuation]],
        dtype=float,
    )


def compact_value(s: StagePayoff, V: float) -> float:
    """Closed-form ``V_{k-1}`` for a stage with an interior equilibrium."""
    return V + (s.s11 * s.s22 - s.s12 * s.s21 - s.s22 * V) / (s.s11 - s.s21 - s.s12 + s.s22 - V)


def solve_stopping_game(stage_payoffs) -> GameSolution:
    stage_payoffs = list(stage_payoffs)
    K = len(stage_payoffs)
    if K < 1:
        raise ValueError("need at least one stage")
    V = [0.0] * (K + 1)
    att: list = [None] * K
    op: list = [None] * K
    interior = [False] * K
    for k in range(K, 0, -1):
        M = stage_matrix(stage_payoffs[k - 1], V[k])
        p, q, val = solve_2x2(M)
        V[k - 1] = val
        att[k - 1] = (float(p[0]), float(p[1]))
        op[k - 1] = (float(q[0]), float(q[1]))
        interior[k - 1] = bool(0.0 < p[0] < 1.0 and 0.0 < q[0] < 1.0)

    reach = 1.0
    stop = []
    for k in range(K):
        hit = reach * att[k][0] * op[k][0]
        stop.append(hit)
        reach -= hit
    return GameSolution(K, tuple(V), tuple(att), tuple(op), tuple(stop), reach, tuple(interior))


def expected_payoff(stage_payoffs, attacker_policies, operator_policies) -> float:
    """Attacker's expected total payoff under fixed behaviour policies.

    Forward evaluation of the game tree: stage payoffs accrue while the game
    is alive, and the stopping state ends it.
    """
    total, reach = 0.0, 1.0
    for s, p, q in zip(stage_payoffs, attacker_policies, operator_policies):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        total += reach * float(p @ s.matrix() @ q)
        reach *= 1.0 - p[0] * q[0]
    return total


class PayoffModel:
    """Evaluates attack payoffs and observability repairs on one grid, with caching.

    ``stale(P, C)`` is the optimal distortion against placement ``P`` with
    compromised PMUs ``C``. ``reoptimized(P, C)`` first lets the operator add
    the fewest PMUs that restore observability from the healthy units (ties
    broken by the smaller determinant metric); new units on compromised buses
    replace them.
    """

    def __init__(self, topology: GridTopology, sigma: float = DEFAULT_SIGMA, tau: float | None = None):
        self.topology = topology
        self.sigma = sigma
        self.tau = tau
        self._ms: dict = {}
        self._attack: dict = {}
        self._repair: dict = {}

    def measurement_system(self, placement: np.ndarray):
        key = placement.tobytes()
        if key not in self._ms:
            self._ms[key] = build_measurement_system(self.topology, placement, self.sigma)
        return self._ms[key]

    def threshold(self, placement: np.ndarray) -> float:
        return self.tau if self.tau is not None else default_tau(self.measurement_system(placement))

    def _log_phi(self, placement: np.ndarray) -> float:
        return log_phi_d_of_gain(gain_matrix(self.measurement_system(placement)))

    def repair(self, placement: np.ndarray, compromised: np.ndarray) -> np.ndarray:
        key = (placement.tobytes(), compromised.tobytes())
        if key not in self._repair:
            self._repair[key] = repair_placement(
                self.topology, placement, compromised, score=self._log_phi
            )
        return self._repair[key]

    def attack_value(self, placement: np.ndarray, compromised: np.ndarray, tau: float) -> float:
        if not np.any(compromised & placement):
            return 0.0
        key = (placement.tobytes(), compromised.tobytes(), tau)
        if key not in self._attack:
            ms = self.measurement_system(placement)
            self._attack[key] = design_attack(ms, compromised & placement, tau).objective
        return self._attack[key]

    def stale(self, placement, compromised, tau: float) -> float:
        return self.attack_value(placement, compromised, tau)

    def reoptimized(self, placement, compromised, tau: float) -> float:
        add = self.repair(placement, compromised)
        return self.attack_value(placement | add, compromised & ~add, tau)


def _as_bool(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=bool)
    if v.shape != (n,):
        raise ValueError(f"expected a length-{n} vector")
    return v


def build_stage_payoffs(
    topology: GridTopology,
    placement,
    risk: RiskMatrix,
    direct,
    stages: int,
    tau: float | None = None,
    sigma: float = DEFAULT_SIGMA,
    model: PayoffModel | None = None,
) -> list[StagePayoff]:
    """Stage payoff matrices for one initial placement and direct-attack set.

    At stage ``k`` the compromise marginals have propagated ``k - 1`` times.
    ``s11`` and ``s12`` are the expected optimal distortions over the
    compromised sets, against the re-optimized and the stale placement
    respectively; not attacking earns nothing.
    """
    if stages < 1:
        raise ValueError("stages must be >= 1")
    n = topology.n_buses
    placement = _as_bool(placement, n)
    direct = _as_bool(direct, n)
    model = model or PayoffModel(topology, sigma, tau)
    t = model.threshold(placement) if tau is None else tau
    out = []
    for state in stage_states(placement, direct, risk, stages):
        s11 = s12 = 0.0
        for C, w in compromise_outcomes(state.prob, placement, direct & placement):
            if not np.any(C):
                continue
            s11 += w * model.reoptimized(placement, C, t)
            s12 += w * model.stale(placement, C, t)
        out.append(StagePayoff(float(s11), float(s12), 0.0, 0.0))
    return out


def distortion_series(
    topology: GridTopology,
    placement,
    risk: RiskMatrix,
    direct,
    stages: int,
    tau: float | None = None,
    sigma: float = DEFAULT_SIGMA,
    model: PayoffModel | None = None,
) -> list[float]:
    """Optimal expected distortion against the unchanged placement, per stage."""
    pay = build_stage_payoffs(topology, placement, risk, direct, stages, tau, sigma, model)
    return [s.s12 for s in pay]
