"""Scheduling sensors for remote estimation with a receiver-side packet buffer."""

from .aoi import (
    AgeVector, StateSpace, TransitionModel, advance, enumerate_states, initial_state,
    transition_distribution,
)
from .dual import (
    DualConfig, DualSolveReport, SensorProblem, dual_ascent, dual_function,
    golden_section_lambda, make_sensor_problem,
)
from .mdp import QTable, SubProblemPolicy, ValueFunction, discounted_usage, gain, greedy_policy, value_iteration
from .scheduling import PolicyKind, SimConfig, SimResult, evaluate_policy_suite, mgf_select, simulate
from .source import (
    ArSourceModel, AutocovarianceTable, ErrorTable, build_error_table, mmse_error,
    monte_carlo_error, reference_model, yule_walker_autocovariance,
)

__version__ = "0.1.0"
