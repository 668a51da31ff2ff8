from itertools import combinations

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from pmugame.attack import RiskMatrix, design_attack, stage_states
from pmugame.estimation import build_measurement_system, gain_matrix, log_phi_d_of_gain
from pmugame.grid import make_topology
from pmugame.stage_game import (
    StagePayoff,
    build_stage_payoffs,
    compact_value,
    distortion_series,
    expected_payoff,
    solve_2x2,
    solve_stopping_game,
    stage_matrix,
)

from helpers import observable_oracle

payoff = st.floats(-10, 10, allow_nan=False)


def test_matching_pennies():
    p, q, v = solve_2x2([[1, -1], [-1, 1]])
    assert p.tolist() == [0.5, 0.5] and q.tolist() == [0.5, 0.5] and v == 0.0


def test_mixed_example():
    p, q, v = solve_2x2([[2, 0], [0, 1]])
    assert np.allclose(p, [1 / 3, 2 / 3]) and np.allclose(q, [1 / 3, 2 / 3])
    assert v == pytest.approx(2 / 3)


def test_dominant_row():
    p, q, v = solve_2x2([[3, 1], [2, 0]])
    assert p.tolist() == [1, 0] and q.tolist() == [0, 1] and v == 1


def test_infinite_column_forced():
    p, q, v = solve_2x2([[np.inf, 1.0], [np.inf, 2.0]])
    assert q.tolist() == [0, 1] and p.tolist() == [0, 1] and v == 2.0


def test_bad_shapes():
    with pytest.raises(ValueError):
        solve_2x2(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        solve_2x2([[np.nan, 0], [0, 0]])
    with pytest.raises(ValueError):
        solve_stopping_game([])


@settings(max_examples=300, deadline=None)
@given(payoff, payoff, payoff, payoff)
def test_solve_2x2_equilibrium(a, b, c, d):
    M = np.array([[a, b], [c, d]])
    p, q, v = solve_2x2(M)
    for s in (p, q):
        assert np.all(s >= 0) and abs(s.sum() - 1) < 1e-12
    tol = 1e-9 * max(1.0, np.abs(M).max())
    # no profitable pure deviation
    assert np.max(M @ q) <= v + tol
    assert np.min(p @ M) >= v - tol
    maximin = M.min(axis=1).max()
    minimax = M.max(axis=0).min()
    assert maximin - tol <= v <= minimax + tol


@settings(max_examples=200, deadline=None)
@given(payoff, payoff, payoff, payoff, st.floats(-5, 5))
def test_translation_invariance(a, b, c, d, shift):
    M = np.array([[a, b], [c, d]])
    # entries that rounding can merge after the shift make the game degenerate
    gap = 1e-9 * max(1.0, np.abs(M).max() + abs(shift))
    assume(min(abs(a - b), abs(c - d), abs(a - c), abs(b - d)) > gap)
    p, q, v = solve_2x2(M)
    p2, q2, v2 = solve_2x2(M + shift)
    assert v2 == pytest.approx(v + shift, abs=1e-9)
    if 0 < p[0] < 1 and 0 < q[0] < 1:
        assert np.allclose(p, p2, atol=1e-9) and np.allclose(q, q2, atol=1e-9)


def test_single_stage_is_val():
    s = StagePayoff(2.0, 0.0, 0.0, 1.0)
    sol = solve_stopping_game([s])
    assert sol.value == pytest.approx(solve_2x2(s.matrix())[2])
    assert sol.values[-1] == 0.0


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(payoff, payoff, payoff, payoff), min_size=1, max_size=6))
def test_recursion_and_indifference(stages):
    pay = [StagePayoff(*s) for s in stages]
    sol = solve_stopping_game(pay)
    assert sol.values[-1] == 0.0
    for k in range(sol.K, 0, -1):
        M = stage_matrix(pay[k - 1], sol.values[k])
        p = np.array(sol.attacker_policies[k - 1])
        q = np.array(sol.operator_policies[k - 1])
        assert abs(p.sum() - 1) < 1e-12 and abs(q.sum() - 1) < 1e-12
        assert sol.values[k - 1] == pytest.approx(p @ M @ q, abs=1e-9 * max(1, np.abs(M).max()))
        if sol.interior[k - 1]:
            tol = 1e-9 * max(1.0, np.abs(M).max())
            assert abs((M @ q)[0] - (M @ q)[1]) < tol
            assert abs((p @ M)[0] - (p @ M)[1]) < tol
            assert compact_value(pay[k - 1], sol.values[k]) == pytest.approx(sol.values[k - 1], rel=1e-9, abs=1e-9)
    assert sum(sol.stop_probability) + sol.survival == pytest.approx(1.0)
    # forward evaluation of the tree under the solved policies gives back the value
    fwd = expected_payoff(pay, sol.attacker_policies, sol.operator_policies)
    assert fwd == pytest.approx(sol.value, abs=1e-8 * max(1.0, abs(sol.value)))


def test_zero_beta_no_attack_zero_payoffs(grid9):
    pay = build_stage_payoffs(grid9, grid9.mask([4, 7]), RiskMatrix.zeros(9), np.zeros(9, bool), 3)
    assert all(s == StagePayoff(0.0, 0.0, 0.0, 0.0) for s in pay)


def test_fig3_trend(grid9, risk9):
    P = grid9.mask([4, 7])
    full = distortion_series(grid9, P, risk9, grid9.mask([4, 7]), 5)
    for D in ([4], [7]):
        sub = distortion_series(grid9, P, risk9, grid9.mask(D), 5)
        assert all(b >= a for a, b in zip(sub, sub[1:]))
        assert all(f >= s for f, s in zip(full, sub))
    assert all(b >= a for a, b in zip(full, full[1:]))


def test_stage_payoffs_reject_bad_input(grid9, risk9):
    with pytest.raises(ValueError):
        build_stage_payoffs(grid9, grid9.mask([4, 7]), risk9, grid9.mask([4]), 0)
    with pytest.raises(ValueError):
        build_stage_payoffs(grid9, np.ones(8, bool), risk9, grid9.mask([4]), 2)


def _composition_oracle(topo, P, beta, D, K, tau):
    """Stage payoffs composed by hand from propagation, explicit outcome sums and brute-force repair."""
    n = topo.n_buses
    out = []
    ms = build_measurement_system(topo, P)
    for state in stage_states(P, D, beta, K):
        s11 = s12 = 0.0
        placed = np.flatnonzero(P)
        for bits in range(1 << placed.size):
            C = np.zeros(n, bool)
            w = 1.0
            for t, j in enumerate(placed):
                hit = bool(bits >> t & 1)
                C[j] = hit
                pj = 1.0 if D[j] else state.prob[j]
                w *= pj if hit else 1.0 - pj
            if w == 0.0 or not C.any():
                continue
            s12 += w * design_attack(ms, C, tau).objective
            healthy = P & ~C
            best = None
            pool = [k for k in range(n) if not healthy[k]]
            for r in range(len(pool) + 1):
                for combo in combinations(pool, r):
                    A = np.zeros(n, bool)
                    A[list(combo)] = True
                    if not observable_oracle(topo, healthy | A):
                        continue
                    score = log_phi_d_of_gain(gain_matrix(build_measurement_system(topo, P | A)))
                    if best is None or score < best[0]:
                        best = (score, A)
                if best is not None:
                    break
            A = best[1]
            ms2 = build_measurement_system(topo, P | A)
            s11 += w * design_attack(ms2, C & ~A, tau).objective
        out.append((s11, s12))
    return out


def test_three_bus_composition():
    topo = make_topology(3, [(0, 1, 1.0 - 8j), (1, 2, 0.7 - 5j)])
    beta = RiskMatrix(np.array([[1, 0.4, 0.1], [0.3, 1, 0.5], [0.2, 0.6, 1]]))
    P = np.ones(3, bool)
    D = np.array([True, False, False])
    pay = build_stage_payoffs(topo, P, beta, D, 3, tau=4.0)
    ref = _composition_oracle(topo, P, beta, D, 3, 4.0)
    for s, (r11, r12) in zip(pay, ref):
        assert s.s11 == pytest.approx(r11, rel=1e-12, abs=1e-18)
        assert s.s12 == pytest.approx(r12, rel=1e-12)
        assert s.s21 == s.s22 == 0.0
