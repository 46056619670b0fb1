"""Sticky particle dynamics on the line: exact event-driven trajectories,
the induced Lagrangian flow map and weak Euler solutions, and a harness that
machine-checks the quantitative estimates they satisfy."""

from .dynamics import (Cluster, MergeEvent, ParticleInit, TrajectorySet, simulate,
                       trajectory_from_dict, trajectory_to_csv, trajectory_to_dict)
from .errors import (AmbiguousTimeError, DomainError, InvalidGridError, InvalidInputError,
                     InvalidPartitionError, InvalidSpecError, StickyFlowError, TimeRangeError)
from .flow_map import (FlowMap, TransitionFn, conditional_expectation, continuity_modulus,
                       flow_equation_residual, interpolate_initial_velocity,
                       sample_nonevent_times)
from .measures import (AtomsSpec, DiscreteMeasure, MeasureSpec, PiecewiseLinearFn,
                       PLDensitySpec, TruncatedGaussianSpec, UniformSpec, discretize,
                       parse_measure_spec, second_moment, wasserstein1)
from .convergence import RefinementStudy, joint_distance, refinement_study
from .verification import (VerificationReport, check_averaging, check_energy,
                           check_flow_equation, check_gap_bound, check_gap_concavity,
                           check_momentum, check_oleinik, check_order_stickiness,
                           check_qspp, check_two_point_gap_bound, check_weak_form,
                           combine_reports, compare_oracle, oracle_simulate,
                           random_instance)
from .weak_solution import SpaceTimeBump, WeakSolutionView, random_bumps

__version__ = "0.1.0"

__all__ = [
    "AmbiguousTimeError", "AtomsSpec", "Cluster", "DiscreteMeasure", "DomainError",
    "FlowMap", "InvalidGridError", "InvalidInputError", "InvalidPartitionError",
    "InvalidSpecError", "MeasureSpec", "MergeEvent", "ParticleInit", "PiecewiseLinearFn",
    "PLDensitySpec", "RefinementStudy", "SpaceTimeBump", "StickyFlowError", "TimeRangeError",
    "TrajectorySet", "TransitionFn", "TruncatedGaussianSpec", "UniformSpec",
    "VerificationReport", "WeakSolutionView", "check_averaging", "check_energy",
    "check_flow_equation", "check_gap_bound", "check_gap_concavity", "check_momentum",
    "check_oleinik", "check_order_stickiness", "check_qspp", "check_two_point_gap_bound",
    "check_weak_form", "combine_reports", "compare_oracle", "conditional_expectation",
    "continuity_modulus", "discretize", "flow_equation_residual",
    "interpolate_initial_velocity", "joint_distance", "oracle_simulate",
    "parse_measure_spec", "random_bumps", "random_instance", "refinement_study",
    "sample_nonevent_times", "second_moment", "simulate", "trajectory_from_dict",
    "trajectory_to_csv", "trajectory_to_dict", "wasserstein1",
]
