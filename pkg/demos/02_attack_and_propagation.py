"""Stealthy injections on the {4,7} placement and how compromise spreads."""

import numpy as np

from pmugame.attack import default_tau, design_attack, detection_statistic, stage_states, table1_risk
from pmugame.estimation import build_measurement_system
from pmugame.grid import ieee9

grid = ieee9()
risk = table1_risk(grid)
P = grid.mask([4, 7])
ms = build_measurement_system(grid, P)
tau = default_tau(ms)
print(f"{ms.H.shape[0]} measurement rows, threshold tau = {tau:.3f}")

for C in ([4], [7], [4, 7]):
    av = design_attack(ms, grid.mask(C), tau)
    stat = detection_statistic(ms, grid.mask(C), av.a)
    print(f"compromised {C}: distortion {av.objective:.6f}, statistic {stat:.6f}, stealthy {av.stealthy}")

# doubling the threshold quadruples the damage
av1 = design_attack(ms, grid.mask([4, 7]), tau)
av2 = design_attack(ms, grid.mask([4, 7]), 2 * tau)
print("objective ratio at 2 tau:", av2.objective / av1.objective)

# indirect compromise with every bus instrumented and 4, 7 hit directly
everything = np.ones(9, dtype=bool)
for s in stage_states(everything, grid.mask([4, 7]), risk, 5):
    print(f"stage {s.stage + 1}:", np.round(s.prob, 4))
