"""End-to-end 9-bus case study: incidence check, attack series, deployment table."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .attack import RiskMatrix, table1_risk
from .bilevel import BilevelGame, GameParams, enumerate_attack_paths, solve_bilevel
from .estimation import DEFAULT_SIGMA
from .grid import GridTopology, build_incidence, ieee9, load_grid
from .observability import min_placement
from .stage_game import PayoffModel, build_stage_payoffs, solve_stopping_game

MODES = ("estimate", "observability", "attack", "stage-game", "bilevel", "reproduce-ieee9")

# reference current-measurement incidence matrix of the 9-bus case, buses 1..9
REFERENCE_INCIDENCE = np.array(
    [
        [0, 1, 0, 0, 0, 0, -1, 0, 0],
        [0, -1, 0, 0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 0, 0, 1, -1, 0],
        [0, 0, 0, 0, 0, 0, -1, 1, 0],
        [0, 0, 0, 0, 0, 0, 0, 1, -1],
        [0, 0, 0, 0, 0, 0, 0, -1, 1],
        [0, 0, -1, 0, 0, 0, 0, 0, 1],
        [0, 0, 1, 0, 0, 0, 0, 0, -1],
        [0, 0, 0, 0, 0, -1, 0, 0, 1],
        [0, 0, 0, 0, 0, 1, 0, 0, -1],
        [0, 0, 0, -1, 0, 1, 0, 0, 0],
        [0, 0, 0, 1, 0, -1, 0, 0, 0],
        [-1, 0, 0, 1, 0, 0, 0, 0, 0],
        [1, 0, 0, -1, 0, 0, 0, 0, 0],
        [0, 0, 0, 1, -1, 0, 0, 0, 0],
        [0, 0, 0, -1, 1, 0, 0, 0, 0],
        [0, 0, 0, 0, 1, 0, -1, 0, 0],
        [0, 0, 0, 0, -1, 0, 1, 0, 0],
    ],
    dtype=int,
)
REFERENCE_PLACEMENT = (4, 7)


class FixtureMismatch(RuntimeError):
    def __init__(self, cells):
        self.cells = cells
        shown = ", ".join(f"({r},{c}): got {g}, expected {e}" for r, c, g, e in cells[:10])
        super().__init__(f"incidence matrix differs in {len(cells)} cells: {shown}")


@dataclass(frozen=True)
class ScenarioConfig:
    grid_path: str | None = None
    risk_path: str | None = None
    sigma: float = DEFAULT_SIGMA
    tau: float | None = None
    stages: int = 5
    seed: int = 0
    out_dir: str | None = None
    mode: str = "reproduce-ieee9"

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError("stages must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    def topology(self) -> GridTopology:
        return load_grid(self.grid_path) if self.grid_path else ieee9()

    def risk(self, topology: GridTopology) -> RiskMatrix:
        if self.risk_path:
            return RiskMatrix.from_csv(self.risk_path, labels=topology.labels)
        return table1_risk(topology)


def incidence_diff(A: np.ndarray, reference: np.ndarray = REFERENCE_INCIDENCE) -> list[tuple]:
    """Cells ``(row, col, got, expected)`` where two incidence matrices disagree (1-based)."""
    if A.shape != reference.shape:
        return [(-1, -1, A.shape, reference.shape)]
    rr, cc = np.nonzero(A != reference)
    return [(int(r) + 1, int(c) + 1, int(A[r, c]), int(reference[r, c])) for r, c in zip(rr, cc)]


def emit_plot_data(series, path, kind: str = "stage") -> Path:
    """Write one labelled series as CSV.

    ``kind="stage"`` takes a sequence of values and writes ``stage,value`` rows
    numbered from 1; ``kind="scenario"`` takes ``(label, count)`` pairs (or a
    mapping) and writes ``scenario,pmu_count`` rows in the given order.
    """
    if kind == "stage":
        rows = [(k, float(v)) for k, v in enumerate(series, start=1)]
        header = ("stage", "value")
    elif kind == "scenario":
        items = series.items() if hasattr(series, "items") else series
        rows = [(str(lab), float(v)) for lab, v in items]
        header = ("scenario", "pmu_count")
    else:
        raise ValueError(f"unknown series kind {kind!r}")
    if not rows:
        raise ValueError("series is empty")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for lab, v in rows:
            w.writerow((lab, repr(v)))
    return path


def _set_name(labels) -> str:
    return "{" + ",".join(str(b) for b in labels) + "}"


@dataclass
class CaseStudyReport:
    incidence: np.ndarray
    incidence_diff: list
    min_placements: list
    placement: list
    attack_combinations: list
    distortion_series: dict
    stage_game: dict
    deployment: dict
    scenario_counts: list
    marginals: dict
    files: list = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self)
        d["incidence"] = self.incidence.tolist()
        return d


def deployment_table(game: BilevelGame) -> dict:
    """Average PMUs deployed: no-attack baseline, game-based and hardened placements."""
    return {
        "no_attack": float(game.baseline_cost),
        "game_based": float(game.expected_cost),
        "hardened": float(game.hardened_cost),
    }


def scenario_counts(game: BilevelGame, labels) -> list[tuple[str, float]]:
    """Expected deployment of the equilibrium placement mix under each attack path."""
    out = []
    per_path = game.p_hat @ game.cost
    for D, c in zip(game.attack_paths, per_path):
        out.append((f"attack={_set_name([labels[k] for k in np.flatnonzero(D)])}", float(c)))
    return out


def reproduce_ieee9(config: ScenarioConfig = ScenarioConfig()) -> CaseStudyReport:
    topology = config.topology()
    risk = config.risk(topology)
    labels = list(topology.labels)

    A = build_incidence(topology).rows.astype(int)
    diff = incidence_diff(A) if labels == list(range(1, 10)) else []
    if diff:
        raise FixtureMismatch(diff)

    mins = [topology.labels_of(m) for m in min_placement(topology)]
    placement = topology.mask(REFERENCE_PLACEMENT) if len(labels) == 9 else min_placement(topology)[0]
    combos = [topology.labels_of(m) for m in enumerate_attack_paths(placement)]

    model = PayoffModel(topology, config.sigma, config.tau)
    series, games = {}, {}
    for D in combos[1:]:
        pay = build_stage_payoffs(
            topology, placement, risk, topology.mask(D), config.stages, config.tau, config.sigma, model
        )
        sol = solve_stopping_game(pay)
        series[_set_name(D)] = [float(s.s12) for s in pay]
        games[_set_name(D)] = {
            "value": sol.value,
            "stop_probability": list(sol.stop_probability),
            "attacker_policies": [list(p) for p in sol.attacker_policies],
            "operator_policies": [list(q) for q in sol.operator_policies],
        }

    params = GameParams(stages=config.stages, sigma=config.sigma, tau=config.tau)
    game = solve_bilevel(topology, risk, params)
    table = deployment_table(game)
    counts = scenario_counts(game, labels)
    marg = {
        "placement": dict(zip(labels, map(float, game.placement_marginals))),
        "attack": dict(zip(labels, map(float, game.attack_marginals))),
    }

    report = CaseStudyReport(
        incidence=A,
        incidence_diff=diff,
        min_placements=mins,
        placement=topology.labels_of(placement),
        attack_combinations=combos,
        distortion_series=series,
        stage_game=games,
        deployment=table,
        scenario_counts=counts,
        marginals=marg,
    )
    if config.out_dir:
        report.files = write_report(report, game, labels, Path(config.out_dir))
    return report


def write_report(report: CaseStudyReport, game: BilevelGame, labels, out: Path) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    files = []
    p = out / "incidence.csv"
    np.savetxt(p, report.incidence, fmt="%d", delimiter=",", header=",".join(map(str, labels)), comments="")
    files.append(p)
    for name, s in report.distortion_series.items():
        files.append(emit_plot_data(s, out / f"distortion_{name.strip('{}').replace(',', '_')}.csv"))
    files.append(emit_plot_data(report.deployment, out / "deployment_averages.csv", kind="scenario"))
    files.append(emit_plot_data(report.scenario_counts, out / "deployment_by_attack.csv", kind="scenario"))
    files.append(write_cost_matrix(game, labels, out / "cost_matrix.csv"))
    p = out / "report.json"
    p.write_text(json.dumps(report.to_json() | {"files": []}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    files.append(p)
    return [f.name for f in files]


def write_cost_matrix(game: BilevelGame, labels, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["placement"] + [_set_name([labels[k] for k in np.flatnonzero(D)]) for D in game.attack_paths])
        for P, row in zip(game.placements, game.cost):
            w.writerow([_set_name([labels[k] for k in np.flatnonzero(P)])] + [repr(float(c)) for c in row])
    return path


__all__ = [
    "REFERENCE_INCIDENCE",
    "ScenarioConfig",
    "CaseStudyReport",
    "FixtureMismatch",
    "incidence_diff",
    "emit_plot_data",
    "deployment_table",
    "reproduce_ieee9",
]
