"""Placement against attack paths: the level-2 matrix game and the deployment table."""

import numpy as np

from pmugame.attack import RiskMatrix, table1_risk
from pmugame.bilevel import GameParams, solve_bilevel
from pmugame.casestudy import ScenarioConfig, reproduce_ieee9
from pmugame.grid import ieee9

grid = ieee9()

quiet = solve_bilevel(grid, RiskMatrix.zeros(9), GameParams(attack_budget=0))
print("no attacks possible:", quiet.expected_cost, "PMUs")

game = solve_bilevel(grid, table1_risk(grid))
print(f"{len(game.placements)} candidate placements x {len(game.attack_paths)} attack paths")
for i in np.flatnonzero(game.p_hat > 1e-9):
    print(" play", grid.labels_of(game.placements[i]), "with prob", round(game.p_hat[i], 3))
for j in np.flatnonzero(game.q_hat > 1e-9):
    print(" attacker hits", grid.labels_of(game.attack_paths[j]), "with prob", round(game.q_hat[j], 3))
print("placement marginals", np.round(game.placement_marginals, 3))
print("attack marginals   ", np.round(game.attack_marginals, 3))
print(f"expected PMUs {game.expected_cost:.3f}; hardened deterministic {game.hardened_cost:g}")

# full pipeline, writing CSVs to ./case_study_out
report = reproduce_ieee9(ScenarioConfig(out_dir="case_study_out"))
print("\ndeployment table", report.deployment)
print("files:", report.files)
