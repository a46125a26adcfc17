"""Per-sensor discounted MDP: transmit (cost ``lam``) or stay idle.

For a fixed transmission price ``lam`` the sensor minimizes
``sum_t gamma^t [err(state_t) + lam * u_t]``.  The Q-function is

    Q(s, 0) = err(s) + gamma * V(fail(s))
    Q(s, 1) = err(s) + lam + gamma * (p V(succ(s)) + (1 - p) V(fail(s)))

with ``V = min_a Q``.  The gain ``Q(s, 0) - Q(s, 1)`` drives the scheduler.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .aoi import StateSpace, TransitionModel
from .source import ErrorTable

MAX_SWEEPS = 10**6
USAGE_TOL = 1e-10


@dataclass(frozen=True)
class ValueFunction:
    values: np.ndarray
    lam: float
    gamma: float
    residual: float
    residuals: np.ndarray
    sweeps: int


@dataclass(frozen=True)
class QTable:
    q: np.ndarray  # shape (S, 2)
    consistent_with: ValueFunction
    states: StateSpace

    @property
    def gains(self) -> np.ndarray:
        return self.q[:, 0] - self.q[:, 1]


@dataclass(frozen=True)
class SubProblemPolicy:
    action: np.ndarray  # uint8 per state id

    def __getitem__(self, sid: int) -> int:
        return int(self.action[sid])


def _stop_threshold(tol: float, gamma: float) -> float:
    return math.inf if gamma == 0.0 else tol * (1.0 - gamma) / gamma


def value_iteration(
    states: StateSpace,
    trans: TransitionModel,
    errs: ErrorTable,
    lam: float,
    gamma: float,
    tol: float = 1e-9,
    v_init: np.ndarray | None = None,
) -> tuple[ValueFunction, QTable]:
    """Solve the Bellman equation by synchronous value iteration.

    Sweeps stop once successive iterates differ by at most
    ``tol * (1 - gamma) / gamma`` in sup-norm, which puts the returned values
    within ``tol`` of the fixed point.  ``v_init`` defaults to zero; warm
    starts only change the number of sweeps.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(
            f"gamma must lie in [0, 1) for the discounted objective, got {gamma}"
        )
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    err = np.ascontiguousarray(errs.values, dtype=np.float64)
    if err.shape != (len(states),):
        raise ValueError("error table does not cover the state space")
    v0 = np.zeros(len(states)) if v_init is None else np.asarray(v_init, dtype=np.float64)
    v, q0, q1, sweeps, residuals = _kernels.value_iteration_kernel(
        err, states.on_success, states.on_failure, float(trans.success_prob),
        float(lam), float(gamma), v0, _stop_threshold(tol, gamma), MAX_SWEEPS,
    )
    if sweeps >= MAX_SWEEPS and residuals[-1] > _stop_threshold(tol, gamma):
        raise RuntimeError("value iteration hit the sweep cap without converging")
    vf = ValueFunction(v, float(lam), float(gamma), float(residuals[-1]), residuals, int(sweeps))
    return vf, QTable(np.column_stack([q0, q1]), vf, states)


def greedy_policy(q: QTable) -> SubProblemPolicy:
    """Transmit only where it is strictly cheaper; ties stay idle."""
    return SubProblemPolicy((q.q[:, 1] < q.q[:, 0]).astype(np.uint8))


def gain(q: QTable, state) -> float:
    sid = q.states.index_of(state)
    return float(q.q[sid, 0] - q.q[sid, 1])


def evaluate_policy(
    policy: SubProblemPolicy,
    states: StateSpace,
    trans: TransitionModel,
    reward: np.ndarray,
    gamma: float,
    tol: float = USAGE_TOL,
) -> np.ndarray:
    """Discounted value of ``reward`` under a fixed stationary policy."""
    reward = np.ascontiguousarray(reward, dtype=np.float64)
    u, _ = _kernels.policy_evaluation_kernel(
        reward, policy.action, states.on_success, states.on_failure,
        float(trans.success_prob), float(gamma), np.zeros(len(states)),
        _stop_threshold(tol, gamma), MAX_SWEEPS,
    )
    return u


def discounted_usage(
    policy: SubProblemPolicy,
    states: StateSpace,
    trans: TransitionModel,
    initial,
    gamma: float,
) -> float:
    """Expected ``sum_t gamma^t u_t`` from ``initial`` under ``policy``."""
    sid = initial if isinstance(initial, (int, np.integer)) else states.index_of(initial)
    u = evaluate_policy(policy, states, trans, policy.action.astype(np.float64), gamma)
    return float(u[sid])


def dump_q_csv(path: str | Path, q: QTable, errs: ErrorTable) -> None:
    """Write ``state_id, err, V, Q0, Q1, gain`` rows plus a legend sidecar."""
    path = Path(path)
    v = q.consistent_with.values
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["state_id", "err", "V", "Q0", "Q1", "gain"])
        for i in range(len(v)):
            w.writerow([i] + [f"{x:.12g}" for x in (errs.values[i], v[i], q.q[i, 0], q.q[i, 1], q.q[i, 0] - q.q[i, 1])])
    with open(path.with_suffix(".legend.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["state_id", "ages"])
        w.writerows(q.states.legend_rows())
