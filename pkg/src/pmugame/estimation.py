"""Linear PMU measurement model, weighted least squares and the determinant metric.

State vector layout: ``x = [Re V_s ; Im V_s]`` over the estimated buses ``s``
(``GridTopology.state_buses``). Voltages of unmonitored buses are treated as
known; their contribution to branch currents is a constant offset and drops
out of every quantity computed here.

Measurement rows follow the four-block layout

    [ Re V (placed buses) ]   [ I      0    ]
    [ Re I (measured)     ] = [ Re Y  -Im Y ] x
    [ Im V (placed buses) ]   [ 0      I    ]
    [ Im I (measured)     ]   [ Im Y   Re Y ]

where a PMU at bus ``i`` measures its own voltage and the current on every
incident branch, oriented away from ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridTopology, build_incidence

DEFAULT_SIGMA = 0.01
SINGULAR_RTOL = 1e-8


@dataclass(frozen=True)
class MeasurementSystem:
    placement: np.ndarray
    H: np.ndarray
    availability: np.ndarray
    R: np.ndarray
    owner: np.ndarray  # bus position of the PMU producing each row
    state_buses: np.ndarray

    @property
    def d(self) -> int:
        """Number of complex measurements (rows come in Re/Im pairs)."""
        return self.H.shape[0] // 2

    @property
    def n_state(self) -> int:
        return self.H.shape[1]

    def rows_of(self, buses: np.ndarray) -> np.ndarray:
        """Indices of available rows produced by PMUs at the masked buses."""
        buses = np.asarray(buses, dtype=bool)
        if self.owner.size == 0:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(buses[self.owner] & self.availability)

    def with_availability(self, availability: np.ndarray) -> "MeasurementSystem":
        availability = np.asarray(availability, dtype=bool)
        if np.any(availability & ~self.placement[self.owner]):
            raise ValueError("a measurement can only be available if its PMU is placed")
        return MeasurementSystem(
            self.placement, self.H, availability, self.R, self.owner, self.state_buses
        )


@dataclass(frozen=True)
class EstimateResult:
    x_hat: np.ndarray
    gain: np.ndarray
    phi_D: float
    observable: bool


def build_measurement_system(
    topology: GridTopology, placement, noise_sigma: float = DEFAULT_SIGMA
) -> MeasurementSystem:
    placement = np.asarray(placement, dtype=bool)
    if placement.shape != (topology.n_buses,):
        raise ValueError(f"placement must have length {topology.n_buses}")
    if noise_sigma <= 0:
        raise ValueError("noise_sigma must be positive")

    states = topology.state_buses
    ns = len(states)
    col = np.full(topology.n_buses, -1)
    col[states] = np.arange(ns)

    placed = np.flatnonzero(placement)
    inc = build_incidence(topology)
    measured = [r for r in range(inc.rows.shape[0]) if placement[inc.measuring_bus[r]]]

    nv, nc = len(placed), len(measured)
    re_v = np.zeros((nv, 2 * ns))
    for r, bus in enumerate(placed):
        if col[bus] >= 0:
            re_v[r, col[bus]] = 1.0
    im_v = np.zeros((nv, 2 * ns))
    for r, bus in enumerate(placed):
        if col[bus] >= 0:
            im_v[r, ns + col[bus]] = 1.0

    # dV = A_row @ V restricted to estimated buses
    A = np.zeros((nc, ns))
    y = np.zeros(nc, dtype=complex)
    for r, inc_row in enumerate(measured):
        k, _ = inc.row_branch[inc_row]
        y[r] = topology.branches[k].admittance
        for bus in np.flatnonzero(inc.rows[inc_row]):
            if col[bus] >= 0:
                A[r, col[bus]] = inc.rows[inc_row, bus]
    re_i = np.hstack([y.real[:, None] * A, -y.imag[:, None] * A])
    im_i = np.hstack([y.imag[:, None] * A, y.real[:, None] * A])

    H = np.vstack([re_v, re_i, im_v, im_i])
    cur_owner = inc.measuring_bus[measured] if nc else np.zeros(0, dtype=int)
    owner = np.concatenate([placed, cur_owner, placed, cur_owner]).astype(int)
    m = H.shape[0]
    return MeasurementSystem(
        placement=placement.copy(),
        H=H,
        availability=np.ones(m, dtype=bool),
        R=noise_sigma**2 * np.eye(m),
        owner=owner,
        state_buses=states,
    )


def gain_matrix(ms: MeasurementSystem) -> np.ndarray:
    """Sum of per-PMU information contributions ``H_i^T R_i^-1 H_i``."""
    n = ms.n_state
    G = np.zeros((n, n))
    for bus in np.flatnonzero(ms.placement):
        rows = np.flatnonzero((ms.owner == bus) & ms.availability)
        if rows.size == 0:
            continue
        Hi = ms.H[rows]
        Ri = ms.R[np.ix_(rows, rows)]
        G += Hi.T @ np.linalg.solve(Ri, Hi)
    return 0.5 * (G + G.T)


def is_nonsingular(G: np.ndarray, rtol: float = SINGULAR_RTOL) -> bool:
    if G.size == 0:
        return False
    s = np.linalg.svd(G, compute_uv=False)
    return bool(s[0] > 0 and s[-1] >= rtol * s[0])


def phi_d_of_gain(G: np.ndarray) -> float:
    """``det(G^-1)`` from a log-determinant, ``inf`` when ``G`` is singular."""
    if not is_nonsingular(G):
        return float("inf")
    sign, logdet = np.linalg.slogdet(G)
    if sign <= 0:
        return float("inf")
    return float(np.exp(-logdet))


def log_phi_d_of_gain(G: np.ndarray) -> float:
    if not is_nonsingular(G):
        return float("inf")
    sign, logdet = np.linalg.slogdet(G)
    return float(-logdet) if sign > 0 else float("inf")


def phi_D(topology: GridTopology, placement, noise_sigma: float = DEFAULT_SIGMA) -> float:
    return phi_d_of_gain(gain_matrix(build_measurement_system(topology, placement, noise_sigma)))


def estimate_state(ms: MeasurementSystem, z, attack=None) -> EstimateResult:
    z = np.asarray(z, dtype=float)
    m = ms.H.shape[0]
    if z.shape != (m,):
        raise ValueError(f"z must have length {m}")
    if attack is not None:
        attack = np.asarray(attack, dtype=float)
        if attack.shape != (m,):
            raise ValueError(f"attack must have length {m}")
        if np.any(attack[~ms.availability] != 0):
            raise ValueError("attack has support on unavailable measurements")
        z = z + attack
    G = gain_matrix(ms)
    if not is_nonsingular(G):
        return EstimateResult(np.full(ms.n_state, np.nan), G, float("inf"), False)
    rows = ms.availability
    Hr = ms.H[rows]
    rhs = Hr.T @ np.linalg.solve(ms.R[np.ix_(rows, rows)], z[rows])
    x_hat = np.linalg.solve(G, rhs)
    return EstimateResult(x_hat, G, phi_d_of_gain(G), True)
