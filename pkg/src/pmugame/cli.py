"""Command-line entry point: ``pmugame <mode> [options]``.

Every mode prints a JSON document on stdout (and writes it under ``--out``
when given). Exit status: 0 ok, 2 invalid input, 3 infeasible, 4 internal.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .attack import RiskMatrix, SingularGainError, default_tau, design_attack, stage_states, table1_risk
from .bilevel import GameParams, solve_bilevel
from .casestudy import (
    FixtureMismatch,
    ScenarioConfig,
    deployment_table,
    emit_plot_data,
    reproduce_ieee9,
    scenario_counts,
    write_cost_matrix,
)
from .estimation import DEFAULT_SIGMA, build_measurement_system, estimate_state
from .grid import GridSpecError, GridTopology, ieee9, load_grid
from .observability import check_observable, min_placement
from .stage_game import build_stage_payoffs, solve_stopping_game

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4


class Infeasible(RuntimeError):
    pass


def _bus_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated bus ids, got {text!r}") from None


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _stages(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _topology(args) -> GridTopology:
    return load_grid(args.grid) if args.grid else ieee9()


def _risk(args, topology: GridTopology) -> RiskMatrix:
    if args.risk:
        return RiskMatrix.from_csv(args.risk, labels=topology.labels)
    if topology.labels != ieee9().labels or topology.n_buses != 9:
        raise ValueError("--risk is required for grids other than the bundled 9-bus case")
    return table1_risk(topology)


def _placement(args, topology: GridTopology) -> np.ndarray:
    if args.placement is not None:
        return topology.mask(args.placement)
    mins = min_placement(topology)
    if not mins:
        raise Infeasible("no observable placement exists")
    return mins[0]


def _emit(args, mode: str, doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{mode}.json").write_text(text + "\n", encoding="utf-8")


def cmd_estimate(args) -> int:
    topo = _topology(args)
    P = _placement(args, topo)
    ms = build_measurement_system(topo, P, args.sigma)
    rng = np.random.default_rng(args.seed)
    ns = ms.n_state // 2
    x_true = np.r_[1.0 + 0.05 * rng.standard_normal(ns), 0.1 * rng.standard_normal(ns)]
    z = ms.H @ x_true + args.sigma * rng.standard_normal(ms.H.shape[0])
    res = estimate_state(ms, z)
    buses = [topo.labels[k] for k in ms.state_buses]
    doc = {
        "placement": topo.labels_of(P),
        "observable": res.observable,
        "phi_D": res.phi_D,
        "state_buses": buses,
        "x_hat": None if not res.observable else res.x_hat.tolist(),
        "x_true": x_true.tolist(),
    }
    _emit(args, "estimate", doc)
    return EXIT_OK if res.observable else EXIT_INFEASIBLE


def cmd_observability(args) -> int:
    topo = _topology(args)
    if args.placement is None:
        mins = min_placement(topo)
        doc = {"min_placements": [topo.labels_of(m) for m in mins], "min_size": int(mins[0].sum()) if mins else None}
        _emit(args, "observability", doc)
        return EXIT_OK
    P = topo.mask(args.placement)
    C = topo.mask(args.compromised or [])
    ok, w = check_observable(topo, P, C)
    labels = topo.labels
    doc = {
        "placement": topo.labels_of(P),
        "compromised": topo.labels_of(C),
        "observable": ok,
        "coverage": dict(zip(map(str, labels), map(int, w.f))),
        "zero_injection_assignment": {
            str(labels[i]): labels[int(np.argmax(w.u[i]))] for i in range(topo.n_buses) if w.u[i].any()
        },
        "unmet_zero_injection": [labels[i] for i in np.flatnonzero(~w.z_flags)],
    }
    _emit(args, "observability", doc)
    return EXIT_OK


def cmd_attack(args) -> int:
    topo = _topology(args)
    P = _placement(args, topo)
    if args.attack_mode == "design":
        C = topo.mask(args.compromised or [])
        ms = build_measurement_system(topo, P, args.sigma)
        tau = args.tau if args.tau is not None else default_tau(ms)
        av = design_attack(ms, C & P, tau)
        doc = {
            "placement": topo.labels_of(P),
            "compromised": topo.labels_of(C & P),
            "tau": tau,
            "a": av.a.tolist(),
            "statistic": av.statistic,
            "stealthy": av.stealthy,
            "objective": av.objective,
        }
    else:
        risk = _risk(args, topo)
        D = topo.mask(args.direct or [])
        states = stage_states(P, D, risk, args.stages)
        doc = {
            "placement": topo.labels_of(P),
            "direct": topo.labels_of(D & P),
            "stages": [
                {"stage": k, "prob": dict(zip(map(str, topo.labels), s.prob.tolist()))}
                for k, s in enumerate(states, start=1)
            ],
        }
    _emit(args, f"attack-{args.attack_mode}", doc)
    return EXIT_OK


def cmd_stage_game(args) -> int:
    topo = _topology(args)
    P = _placement(args, topo)
    risk = _risk(args, topo)
    D = topo.mask(args.direct) if args.direct else P
    pay = build_stage_payoffs(topo, P, risk, D, args.stages, args.tau, args.sigma)
    sol = solve_stopping_game(pay)
    doc = {
        "placement": topo.labels_of(P),
        "direct": topo.labels_of(D & P),
        "K": sol.K,
        "values": list(sol.values),
        "attacker_policies": [list(p) for p in sol.attacker_policies],
        "operator_policies": [list(q) for q in sol.operator_policies],
        "stop_probability": list(sol.stop_probability),
        "survival": sol.survival,
        "payoffs": [[s.s11, s.s12, s.s21, s.s22] for s in pay],
    }
    if args.emit_csv:
        with open(args.emit_csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "V_k", "p1", "q1", "s11", "s12", "s21", "s22"])
            for k, s in enumerate(pay, start=1):
                w.writerow([k, repr(sol.values[k]), repr(sol.attacker_policies[k - 1][0]),
                            repr(sol.operator_policies[k - 1][0]),
                            repr(s.s11), repr(s.s12), repr(s.s21), repr(s.s22)])
    _emit(args, "stage-game", doc)
    return EXIT_OK


def cmd_bilevel(args) -> int:
    topo = _topology(args)
    risk = _risk(args, topo)
    params = GameParams(stages=args.stages, sigma=args.sigma, tau=args.tau,
                        attack_budget=args.budget, slack=args.slack)
    game = solve_bilevel(topo, risk, params)
    labels = topo.labels
    support = np.flatnonzero(game.p_hat > 1e-12)
    doc = {
        "expected_cost": game.expected_cost,
        "baseline_cost": game.baseline_cost,
        "hardened_cost": game.hardened_cost,
        "pure_minimax_cost": game.pure_minimax_cost,
        "placement_strategy": [
            {"placement": topo.labels_of(game.placements[i]), "prob": float(game.p_hat[i])} for i in support
        ],
        "attack_strategy": [
            {"direct": topo.labels_of(game.attack_paths[j]), "prob": float(game.q_hat[j])}
            for j in np.flatnonzero(game.q_hat > 1e-12)
        ],
        "placement_marginals": dict(zip(map(str, labels), game.placement_marginals.tolist())),
        "attack_marginals": dict(zip(map(str, labels), game.attack_marginals.tolist())),
        "deployment": deployment_table(game),
    }
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_cost_matrix(game, labels, Path(args.out) / "cost_matrix.csv")
    if args.emit_csv:
        emit_plot_data(scenario_counts(game, labels), args.emit_csv, kind="scenario")
    _emit(args, "bilevel", doc)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    cfg = ScenarioConfig(
        grid_path=args.grid, risk_path=args.risk, sigma=args.sigma, tau=args.tau,
        stages=args.stages, seed=args.seed, out_dir=args.out, mode="reproduce-ieee9",
    )
    report = reproduce_ieee9(cfg)
    doc = report.to_json()
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.emit_csv:
        emit_plot_data(report.deployment, args.emit_csv, kind="scenario")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--grid", help="grid document (default: bundled 9-bus case)")
    shared.add_argument("--risk", help="risk-propagation CSV (default: bundled table for the 9-bus case)")
    shared.add_argument("--sigma", type=_positive, default=DEFAULT_SIGMA, help="measurement noise std (p.u.)")
    shared.add_argument("--tau", type=_positive, default=None, help="detection threshold")
    shared.add_argument("--stages", type=_stages, default=5, help="number of game stages K")
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--out", help="output directory")
    shared.add_argument("--emit-csv", dest="emit_csv", help="write plot data to this CSV")

    parser = argparse.ArgumentParser(prog="pmugame", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)

    p = sub.add_parser("estimate", parents=[shared], help="WLS estimate on seeded synthetic measurements")
    p.add_argument("--placement", type=_bus_list)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("observability", parents=[shared], help="observability check or minimum placement")
    p.add_argument("--placement", type=_bus_list)
    p.add_argument("--compromised", type=_bus_list)
    p.set_defaults(func=cmd_observability)

    p = sub.add_parser("attack", help="stealthy injection design or compromise propagation")
    asub = p.add_subparsers(dest="attack_mode", required=True)
    for name, help_ in (("design", "optimal stealthy injection"), ("propagate", "stage-wise compromise probabilities")):
        q = asub.add_parser(name, parents=[shared], help=help_)
        q.add_argument("--placement", type=_bus_list)
        q.add_argument("--compromised", type=_bus_list)
        q.add_argument("--direct", type=_bus_list)
        q.set_defaults(func=cmd_attack)

    p = sub.add_parser("stage-game", parents=[shared], help="level-1 stopping game")
    p.add_argument("--placement", type=_bus_list)
    p.add_argument("--direct", type=_bus_list, help="directly attacked buses (default: every placed PMU)")
    p.set_defaults(func=cmd_stage_game)

    p = sub.add_parser("bilevel", parents=[shared], help="level-2 placement game")
    p.add_argument("--budget", type=int, default=1, help="largest direct-attack set")
    p.add_argument("--slack", type=int, default=2, help="candidate sizes up to minimum + slack")
    p.set_defaults(func=cmd_bilevel)

    p = sub.add_parser("reproduce-ieee9", parents=[shared], help="full 9-bus case study")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except (GridSpecError, ValueError, KeyError, FileNotFoundError) as e:
        if isinstance(e, SingularGainError):
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (Infeasible, FixtureMismatch) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
