"""The attacker/operator stopping game on the {4,7} placement."""

import numpy as np

from pmugame.attack import table1_risk
from pmugame.grid import ieee9
from pmugame.stage_game import StagePayoff, build_stage_payoffs, solve_2x2, solve_stopping_game

# warm-up on hand-made matrices
for M in ([[1, -1], [-1, 1]], [[2, 0], [0, 1]], [[3, 1], [2, 0]]):
    p, q, v = solve_2x2(M)
    print(M, "-> attacker", p, "operator", q, "value", round(v, 4))

grid = ieee9()
risk = table1_risk(grid)
P = grid.mask([4, 7])

for D in ([4], [7], [4, 7]):
    pay = build_stage_payoffs(grid, P, risk, grid.mask(D), stages=5)
    sol = solve_stopping_game(pay)
    print(f"\ndirect attack {D}")
    print(" stale-placement distortion by stage:", np.round([s.s12 for s in pay], 6))
    print(" after re-optimizing:               ", np.round([s.s11 for s in pay], 6))
    print(" game value", sol.value, " stop probabilities", np.round(sol.stop_probability, 3))

# a synthetic game where waiting pays off for the attacker
pay = [StagePayoff(1.0, 2.0, 0.0, 0.5), StagePayoff(3.0, 1.0, 0.0, 0.2), StagePayoff(4.0, 0.5, 0.0, 0.0)]
sol = solve_stopping_game(pay)
print("\nsynthetic game values", np.round(sol.values, 4))
print("attack probabilities", [round(p[0], 3) for p in sol.attacker_policies])
print("stop probabilities", np.round(sol.stop_probability, 3), "survival", round(sol.survival, 3))
