"""Ergodicity bounds for reflected Brownian motion in convex bodies.

Closed-form total-variation bounds driven by the one-dimensional
exit-time series, a mirror-coupling Monte Carlo engine that checks them
empirically, exact interval solutions that pin the bounds' tightness,
and a CLI that turns configs into replayable CSV/JSON artifacts.
"""

from .bounds import (BOUND_KINDS, BoundCurve, SeriesBudgetError, SeriesEval,
                     bebendorf_envelope, bebendorf_rate,
                     chernoff_survival_bound, evaluate_bound_curve,
                     matthews_bound, survival_F, survival_F_values,
                     tv_bound_pair, tv_bound_stationary,
                     write_bound_curves_csv)
from .coupling import (CoupledState, CouplingDiagnostics, CouplingOutcome,
                       DriftEnvelopeError, DriftModel, PathState,
                       couple_states, fold_reflect_1d, mirror_step, ou_drift,
                       outcome_times, run_comparison_Z_replicates,
                       run_coupling_replicates, simulate_comparison_Z,
                       simulate_coupling_time, simulate_reflected_paths,
                       step_reflected, write_outcomes_csv)
from .geometry import (Ball, Box, ConvexBody, Interval, Polytope,
                       ProjectionConvergenceError, UniformSample,
                       antipodal_points, parse_domain_spec)
from .oracle1d import (Heat1D, cdf_V, exact_tv, exit_time_survival_mc,
                       neumann_kernel, tightness_rows, tv_lower_witness,
                       write_tightness_csv)
from .stats import (HitProbReport, L2DecayResult, PairVerification,
                    SurvivalCurve, VerificationReport, ZDominationReport,
                    curve_shift, dkw_halfwidth, empirical_tv_1d,
                    hitprob_experiment, hitprob_report_json,
                    l2_decay_experiment, run_pair_verification,
                    run_z_domination, survival_curve, verification_report_json,
                    verify_bound, z_domination_json)
from .streams import CounterNoise, as_noise

__version__ = "0.1.0"

__all__ = [
    "BOUND_KINDS", "Ball", "BoundCurve", "Box", "ConvexBody", "CoupledState",
    "CouplingDiagnostics", "CouplingOutcome", "CounterNoise",
    "DriftEnvelopeError", "DriftModel", "Heat1D", "HitProbReport", "Interval",
    "L2DecayResult", "PairVerification", "PathState", "Polytope",
    "ProjectionConvergenceError", "SeriesBudgetError", "SeriesEval",
    "SurvivalCurve", "UniformSample", "VerificationReport",
    "ZDominationReport", "antipodal_points", "as_noise",
    "bebendorf_envelope", "bebendorf_rate", "cdf_V", "chernoff_survival_bound",
    "couple_states", "curve_shift", "dkw_halfwidth", "empirical_tv_1d",
    "evaluate_bound_curve", "exact_tv", "exit_time_survival_mc",
    "fold_reflect_1d", "hitprob_experiment", "hitprob_report_json",
    "l2_decay_experiment", "matthews_bound", "mirror_step", "neumann_kernel",
    "ou_drift", "outcome_times", "parse_domain_spec",
    "run_comparison_Z_replicates", "run_coupling_replicates",
    "run_pair_verification", "run_z_domination", "simulate_comparison_Z",
    "simulate_coupling_time", "simulate_reflected_paths", "step_reflected",
    "survival_F", "survival_F_values", "survival_curve", "tightness_rows",
    "tv_bound_pair", "tv_bound_stationary", "tv_lower_witness",
    "verification_report_json", "verify_bound", "write_bound_curves_csv",
    "write_outcomes_csv", "write_tightness_csv", "z_domination_json",
]
