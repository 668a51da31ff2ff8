"""Walk through the bundled 9-bus grid: incidence, observability, estimation."""

import numpy as np

from pmugame.estimation import build_measurement_system, estimate_state, phi_D
from pmugame.grid import build_incidence, ieee9
from pmugame.observability import check_observable, min_placement

grid = ieee9()
print(grid.name, grid.n_buses, "buses,", grid.n_branches, "branches")
print("load buses:", grid.labels_of(grid.load))

A = build_incidence(grid).rows
print("incidence matrix", A.shape)
print(A)

# smallest placements that see every load bus
mins = min_placement(grid)
print("minimum placements:", [grid.labels_of(m) for m in mins])

P = grid.mask([4, 7])
ok, witness = check_observable(grid, P)
print("{4,7} observable:", ok, " coverage:", witness.f.tolist())

# lose the unit at bus 4 and bus 1 goes dark
ok, witness = check_observable(grid, P, compromised=grid.mask([4]))
print("{4,7} with 4 compromised:", ok, " coverage:", witness.f.tolist())

# estimate from noisy synthetic phasors
ms = build_measurement_system(grid, P, noise_sigma=0.01)
rng = np.random.default_rng(0)
ns = ms.n_state // 2
x = np.r_[1 + 0.05 * rng.standard_normal(ns), 0.1 * rng.standard_normal(ns)]
z = ms.H @ x + 0.01 * rng.standard_normal(ms.H.shape[0])
res = estimate_state(ms, z)
print("max estimation error:", np.abs(res.x_hat - x).max())

# phi_D shrinks as units are added
for extra in ([], [1], [1, 2], [1, 2, 6]):
    Q = grid.mask([4, 7] + extra)
    print(f"placement {grid.labels_of(Q)}: log phi_D = {np.log(phi_D(grid, Q)):.2f}")
