"""Game-theoretic PMU placement under direct and propagating cyber attacks."""

from .attack import (
    AttackVector,
    CompromiseState,
    RiskMatrix,
    SingularGainError,
    design_attack,
    detection_statistic,
    distortion,
    propagate,
    stage_states,
    table1_risk,
)
from .bilevel import BilevelGame, GameParams, enumerate_attack_paths, solve_bilevel, solve_matrix_game
from .casestudy import ScenarioConfig, emit_plot_data, reproduce_ieee9
from .estimation import (
    EstimateResult,
    MeasurementSystem,
    build_measurement_system,
    estimate_state,
    gain_matrix,
    phi_D,
)
from .grid import GridSpecError, GridTopology, build_incidence, ieee9, load_grid, make_topology
from .observability import check_observable, min_placement, prob_observability, repair_placement
from .stage_game import (
    GameSolution,
    StagePayoff,
    build_stage_payoffs,
    distortion_series,
    solve_2x2,
    solve_stopping_game,
)

__version__ = "0.1.0"
