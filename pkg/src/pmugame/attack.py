"""Direct attacks, stage-wise risk propagation and stealthy injection design.

Detection model: an injection ``a`` on the compromised rows shifts the state
estimate those rows would produce on their own,

    dx_c = G_c^-1 H_c^T R_c^-1 a_c ,

with ``G_c`` the gain of the compromised rows restricted to the state
components they touch. The detection statistic is the length of that shift in
its own information metric, ``sqrt(dx_c' G_c dx_c)`` (the Euclidean norm of
the whitened shift, in noise standard deviations); the injection is flagged
when it reaches ``tau``.

The damage is the Euclidean size of the shift of the operator's full
estimator, ``||G^-1 H^T R^-1 a||^2``. Injections with equal statistic form
nested sets as the compromised set grows, so the optimal damage is monotone
in the compromised set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .estimation import MeasurementSystem, gain_matrix, is_nonsingular
from .grid import GridTopology

STEALTH_MARGIN = 1e-6


class SingularGainError(ValueError):
    """Raised when a gain matrix needed for an attack computation is singular."""


@dataclass(frozen=True)
class RiskMatrix:
    """Propagation probabilities; ``beta[i, j]`` is the chance that a compromised
    PMU at ``i`` compromises a healthy PMU at ``j`` within one stage."""

    beta: np.ndarray

    def __post_init__(self):
        b = np.array(self.beta, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("risk matrix must be square")
        if np.any((b < 0) | (b > 1)):
            raise ValueError("risk probabilities must lie in [0, 1]")
        if not np.allclose(np.diag(b), 1.0):
            raise ValueError("risk matrix diagonal must be 1")
        np.fill_diagonal(b, 1.0)
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    @property
    def n(self) -> int:
        return self.beta.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "RiskMatrix":
        return cls(np.eye(n))

    @classmethod
    def from_csv(cls, path: str | Path, labels=None) -> "RiskMatrix":
        """Read the tabular layout: header row of bus ids, one row per source bus.

        A leading label column is accepted. When ``labels`` is given the
        matrix is reordered to match it.
        """
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
        if len(rows) < 2:
            raise ValueError(f"{path}: empty risk table")
        header = [c.strip() for c in rows[0]]
        has_label_col = len(rows[1]) == len(header) and not _is_number(header[0])
        col_ids = header[1:] if has_label_col else header
        try:
            col_ids = [int(c) for c in col_ids]
        except ValueError:
            raise ValueError(f"{path}: header must list integer bus ids") from None
        body, row_ids = [], []
        for n, r in enumerate(rows[1:], start=2):
            cells = [c.strip() for c in r]
            if has_label_col:
                row_ids.append(int(cells[0]))
                cells = cells[1:]
            if len(cells) != len(col_ids):
                raise ValueError(f"{path}: row {n} has {len(cells)} entries, expected {len(col_ids)}")
            body.append([float(c) for c in cells])
        if not row_ids:
            row_ids = list(col_ids)
        if sorted(row_ids) != sorted(col_ids):
            raise ValueError(f"{path}: row and column bus ids differ")
        beta = np.array(body)
        if labels is not None:
            labels = list(labels)
            if sorted(labels) != sorted(col_ids):
                raise ValueError(f"{path}: bus ids do not match the grid")
            ri = [row_ids.index(lab) for lab in labels]
            ci = [col_ids.index(lab) for lab in labels]
            beta = beta[np.ix_(ri, ci)]
        return cls(beta)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def table1_risk(topology: GridTopology | None = None) -> RiskMatrix:
    from .grid import fixture_path

    labels = topology.labels if topology is not None else None
    return RiskMatrix.from_csv(fixture_path("table1.csv"), labels=labels)


@dataclass(frozen=True)
class CompromiseState:
    stage: int
    prob: np.ndarray
    direct: np.ndarray


def initial_state(placement, direct) -> CompromiseState:
    placement = np.asarray(placement, dtype=bool)
    direct = np.asarray(direct, dtype=bool)
    return CompromiseState(0, (direct & placement).astype(float), direct.copy())


def propagate(state: CompromiseState, beta: RiskMatrix, placement) -> CompromiseState:
    """One stage of indirect compromise.

    ``p'_j = 1 - (1 - p_j) * prod_{i != j} (1 - p_i * beta_ij)`` for placed ``j``,
    evaluated as ``p_j + (1 - p_j) * (1 - prod)`` so that nothing moves when
    nothing can spread.
    """
    placement = np.asarray(placement, dtype=bool)
    p = np.where(placement, state.prob, 0.0)
    b = beta.beta.copy()
    np.fill_diagonal(b, 0.0)
    escape = np.prod(1.0 - p[:, None] * b, axis=0)
    new = np.where(placement, p + (1.0 - p) * (1.0 - escape), 0.0)
    return CompromiseState(state.stage + 1, np.minimum(new, 1.0), state.direct)


def stage_states(placement, direct, beta: RiskMatrix, stages: int) -> list[CompromiseState]:
    """Compromise state at stages ``1..stages``; stage 1 is the direct attack alone."""
    s = initial_state(placement, direct)
    out = [s]
    for _ in range(stages - 1):
        s = propagate(s, beta, placement)
        out.append(s)
    return out


def compromise_outcomes(prob, placement, direct=None):
    """Enumerate compromised sets with their probabilities.

    PMUs are treated as independently compromised with the given marginals;
    ``direct`` PMUs are compromised with certainty. Yields ``(mask, weight)``
    for outcomes of non-zero probability.
    """
    prob = np.asarray(prob, dtype=float)
    placement = np.asarray(placement, dtype=bool)
    sure = placement & (prob >= 1.0)
    if direct is not None:
        sure |= placement & np.asarray(direct, dtype=bool)
    free = [int(j) for j in np.flatnonzero(placement & ~sure) if prob[j] > 0.0]
    for r in range(len(free) + 1):
        for hit in combinations(free, r):
            mask = sure.copy()
            mask[list(hit)] = True
            w = 1.0
            for j in free:
                w *= prob[j] if mask[j] else 1.0 - prob[j]
            yield mask, w


def default_tau(ms: MeasurementSystem) -> float:
    """Three-sigma threshold on the whitened statistic, ``3 * sqrt(2d)``."""
    return 3.0 * float(np.sqrt(ms.H.shape[0]))


def _restricted(ms: MeasurementSystem, compromised):
    """Rows of the compromised PMUs, touched state columns and their gain."""
    rows = ms.rows_of(np.asarray(compromised, dtype=bool))
    Hs = ms.H[rows]
    touched = np.flatnonzero(np.any(Hs != 0, axis=0))
    Rs = ms.R[np.ix_(rows, rows)]
    Ht = Hs[:, touched]
    Gc = Ht.T @ np.linalg.solve(Rs, Ht) if touched.size else np.zeros((0, 0))
    return rows, touched, Ht, Rs, Gc


def _check_support(ms: MeasurementSystem, rows: np.ndarray, a: np.ndarray) -> None:
    off = np.ones(a.size, dtype=bool)
    off[rows] = False
    if np.any(a[off] != 0):
        raise ValueError("attack has support outside compromised, available measurements")


def state_shift_map(ms: MeasurementSystem, compromised) -> np.ndarray:
    """Linear map from the compromised-row injection to the detector's state shift."""
    rows, touched, Ht, Rs, Gc = _restricted(ms, compromised)
    out = np.zeros((ms.n_state, rows.size))
    if touched.size == 0:
        return out
    if not is_nonsingular(Gc):
        raise SingularGainError("gain of the compromised measurements is singular")
    out[touched] = np.linalg.solve(Gc, Ht.T @ np.linalg.inv(Rs))
    return out


def estimate_shift_map(ms: MeasurementSystem, compromised) -> np.ndarray:
    """Linear map from the compromised-row injection to the full WLS estimate shift."""
    rows = ms.rows_of(np.asarray(compromised, dtype=bool))
    G = gain_matrix(ms)
    if not is_nonsingular(G):
        raise SingularGainError("placement is not numerically observable")
    Hs = ms.H[rows]
    return np.linalg.solve(G, Hs.T @ np.linalg.inv(ms.R[np.ix_(rows, rows)]))


def _whitener(G: np.ndarray) -> np.ndarray:
    """``L'`` with ``G = L L'``, so that ``x' G x = ||L' x||^2``."""
    return np.linalg.cholesky(G).T


def detector_map(ms: MeasurementSystem, compromised) -> np.ndarray:
    """Injection on compromised rows -> whitened detector shift."""
    rows, touched, _, _, Gc = _restricted(ms, compromised)
    if touched.size == 0:
        return np.zeros((0, rows.size))
    S = state_shift_map(ms, compromised)[touched]
    return _whitener(Gc) @ S


def distortion_map(ms: MeasurementSystem, compromised) -> np.ndarray:
    """Injection on compromised rows -> full-estimator state shift."""
    return estimate_shift_map(ms, compromised)


def detection_statistic(ms: MeasurementSystem, compromised, a) -> float:
    a = np.asarray(a, dtype=float)
    rows = ms.rows_of(np.asarray(compromised, dtype=bool))
    _check_support(ms, rows, a)
    if rows.size == 0:
        return 0.0
    return float(np.linalg.norm(detector_map(ms, compromised) @ a[rows]))


def distortion(ms: MeasurementSystem, compromised, a) -> float:
    """Squared Euclidean shift of the operator's estimate caused by ``a``."""
    a = np.asarray(a, dtype=float)
    rows = ms.rows_of(np.asarray(compromised, dtype=bool))
    _check_support(ms, rows, a)
    if rows.size == 0:
        return 0.0
    return float(np.sum((distortion_map(ms, compromised) @ a[rows]) ** 2))


@dataclass(frozen=True)
class AttackVector:
    a: np.ndarray
    support: np.ndarray
    statistic: float
    stealthy: bool
    objective: float
    tau: float


def design_attack(ms: MeasurementSystem, compromised, tau: float) -> AttackVector:
    """Largest distortion reachable while ``statistic < tau``.

    Both quantities are linear in the injection and share a null space, so the
    optimum is the top right-singular vector of ``distortion @ pinv(detector)``,
    mapped back through the pseudo-inverse and scaled so the statistic equals
    ``(1 - STEALTH_MARGIN) * tau``. Returns the minimum-norm injection.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    m = ms.H.shape[0]
    rows = ms.rows_of(np.asarray(compromised, dtype=bool))
    a = np.zeros(m)
    D = detector_map(ms, compromised) if rows.size else np.zeros((0, 0))
    if D.size == 0 or not np.any(D):
        return AttackVector(a, rows, 0.0, True, 0.0, tau)
    F = distortion_map(ms, compromised)
    D_pinv = np.linalg.pinv(D)
    _, _, vt = np.linalg.svd(F @ D_pinv)
    y = vt[0]
    k = np.argmax(np.abs(y))
    if y[k] < 0:
        y = -y
    a[rows] = D_pinv @ ((1.0 - STEALTH_MARGIN) * tau * y)
    stat = detection_statistic(ms, compromised, a)
    obj = distortion(ms, compromised, a)
    return AttackVector(a, rows, stat, bool(stat < tau), obj, tau)
