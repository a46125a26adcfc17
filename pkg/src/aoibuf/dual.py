"""Lagrangian dual of the channel budget and its subgradient ascent.

Pricing each transmission at ``lam`` decouples the sensors.  The dual value

    q(lam) = sum_n V*_{n,lam}(initial) - lam * M / (1 - gamma)

is concave and piecewise linear in ``lam``; its subgradient is the total
discounted channel usage of the per-sensor optimal policies minus the
budget ``M / (1 - gamma)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .aoi import DEFAULT_DELTA_MAX, StateSpace, TransitionModel, enumerate_states
from .mdp import QTable, discounted_usage, greedy_policy, value_iteration
from .source import ArSourceModel, ErrorTable, build_error_table

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SensorProblem:
    """Everything one sensor's sub-problem needs."""

    model: ArSourceModel
    states: StateSpace
    trans: TransitionModel
    errs: ErrorTable

    @property
    def key(self) -> tuple:
        m = self.model
        return (m.coeffs, m.noise_var, self.trans.success_prob, self.states.b, self.states.delta_max)


def make_sensor_problem(
    model: ArSourceModel,
    b: int,
    delta_max: int = DEFAULT_DELTA_MAX,
    success_prob: float | None = None,
    states: StateSpace | None = None,
    errs: ErrorTable | None = None,
) -> SensorProblem:
    states = states or enumerate_states(b, delta_max)
    p = model.success_prob if success_prob is None else success_prob
    errs = errs if errs is not None else build_error_table(model, states)
    return SensorProblem(model, states, TransitionModel(p, states.delta_max), errs)


@dataclass
class DualConfig:
    beta: float = 1.0
    max_iter: int = 500
    residual_tol: float | None = None  # None -> 1e-3 * M / (1 - gamma)
    lambda_init: float = 0.0
    vi_tol: float = 1e-9

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.residual_tol is not None and not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.lambda_init < 0:
            raise ValueError("lambda_init must be nonnegative")

    def tolerance(self, M: int, gamma: float) -> float:
        if self.residual_tol is not None:
            return self.residual_tol
        return 1e-3 * M / (1.0 - gamma)


@dataclass
class DualSolveReport:
    lambda_star: float
    budget: float
    final_usage: float
    iterates: list[tuple[int, float, float]]
    q_tables: list[QTable] = field(repr=False)
    dual_value: float = math.nan
    stop_reason: str = ""

    def to_json(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "budget": self.budget,
            "final_usage": self.final_usage,
            "iterates": [[k, lam, g] for k, lam, g in self.iterates],
            "stop_reason": self.stop_reason,
        }

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


class DualEvaluator:
    """Evaluates q(lam) and its subgradient, sharing work across calls.

    Identical sensors are solved once per multiplier, value iteration is
    warm-started from the previous solution, and usage is cached per
    distinct greedy policy.
    """

    def __init__(self, sensors: Sequence[SensorProblem], M: int, gamma: float, vi_tol: float = 1e-9):
        if M < 1:
            raise ValueError("M must be >= 1")
        if not 0.0 <= gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1) for the discounted objective, got {gamma}")
        self.sensors = list(sensors)
        self.M = M
        self.gamma = gamma
        self.vi_tol = vi_tol
        self.budget = M / (1.0 - gamma)
        self._warm: dict[tuple, np.ndarray] = {}
        self._usage: dict[tuple, float] = {}
        self._last: tuple[float, list] | None = None

    def solve(self, lam: float) -> list[tuple[float, QTable, float]]:
        """Per sensor: (V at the initial state, Q-table, discounted usage)."""
        if self._last is not None and self._last[0] == lam:
            return self._last[1]
        by_key: dict[tuple, tuple[float, QTable, float]] = {}
        out = []
        for sp in self.sensors:
            key = sp.key
            if key not in by_key:
                vf, q = value_iteration(sp.states, sp.trans, sp.errs, lam, self.gamma, self.vi_tol, self._warm.get(key))
                self._warm[key] = vf.values
                pol = greedy_policy(q)
                ukey = (key, pol.action.tobytes())
                if ukey not in self._usage:
                    self._usage[ukey] = discounted_usage(pol, sp.states, sp.trans, sp.states.initial, self.gamma)
                by_key[key] = (float(vf.values[sp.states.initial]), q, self._usage[ukey])
            out.append(by_key[key])
        self._last = (lam, out)
        return out

    def __call__(self, lam: float) -> tuple[float, float]:
        parts = self.solve(lam)
        value = sum(v for v, _, _ in parts) - lam * self.budget
        subgradient = sum(u for _, _, u in parts) - self.budget
        return value, subgradient


def dual_function(
    lam: float, sensors: Sequence[SensorProblem], M: int, gamma: float, vi_tol: float = 1e-9
) -> tuple[float, float]:
    """Return ``(q(lam), subgradient)``."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    return DualEvaluator(sensors, M, gamma, vi_tol)(lam)


def dual_ascent(
    sensors: Sequence[SensorProblem],
    M: int,
    gamma: float,
    cfg: DualConfig | None = None,
    evaluator: DualEvaluator | None = None,
) -> DualSolveReport:
    """Projected subgradient ascent ``lam <- max(0, lam + beta / k * g)``.

    Stops early when ``|g| <= residual_tol`` or when ``lam == 0`` with
    ``g <= 0``.  Otherwise, after ``max_iter`` steps, the iterate with the
    largest dual value is returned: the method is not monotone and the
    dual is maximized at a kink where ``g`` never reaches zero.
    """
    cfg = cfg or DualConfig()
    ev = evaluator or DualEvaluator(sensors, M, gamma, cfg.vi_tol)
    tol = cfg.tolerance(M, gamma)
    lam = float(cfg.lambda_init)
    iterates: list[tuple[int, float, float]] = []
    best_val, best_lam = -math.inf, lam
    reason = "max_iter"
    for k in range(1, cfg.max_iter + 1):
        val, g = ev(lam)
        iterates.append((k, lam, g))
        if not (math.isfinite(val) and math.isfinite(g)):
            trace = ", ".join(f"({kk}, {ll:.6g}, {gg:.6g})" for kk, ll, gg in iterates[-10:])
            raise FloatingPointError(f"non-finite dual subgradient at iteration {k}; last iterates: {trace}")
        if val > best_val:
            best_val, best_lam = val, lam
        if abs(g) <= tol:
            reason, best_lam, best_val = "residual", lam, val
            break
        if lam == 0.0 and g <= 0.0:
            reason, best_lam, best_val = "zero_multiplier", lam, val
            break
        lam = max(0.0, lam + cfg.beta / k * g)
    log.debug("dual ascent stopped (%s) at lambda*=%.8g after %d iterations", reason, best_lam, len(iterates))
    parts = ev.solve(best_lam)
    return DualSolveReport(
        lambda_star=best_lam,
        budget=ev.budget,
        final_usage=sum(u for _, _, u in parts),
        iterates=iterates,
        q_tables=[q for _, q, _ in parts],
        dual_value=best_val,
        stop_reason=reason,
    )


def lambda_upper_bound(sensors: Sequence[SensorProblem], gamma: float) -> float:
    """A price above which no sensor ever transmits."""
    return max(float(sp.errs.values.max()) for sp in sensors) / (1.0 - gamma)


def golden_section_lambda(
    sensors: Sequence[SensorProblem],
    M: int,
    gamma: float,
    hi: float | None = None,
    tol: float = 1e-6,
    vi_tol: float = 1e-9,
) -> float:
    """Maximize the concave dual over ``[0, hi]`` by golden-section search."""
    ev = DualEvaluator(sensors, M, gamma, vi_tol)
    cache: dict[float, float] = {}

    def q(x: float) -> float:
        if x not in cache:
            cache[x] = ev(x)[0]
        return cache[x]

    a, b = 0.0, lambda_upper_bound(sensors, gamma) if hi is None else hi
    r = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - r * (b - a), a + r * (b - a)
    while b - a > tol:
        if q(c) >= q(d):
            b, d = d, c
            c = b - r * (b - a)
        else:
            a, c = c, d
            d = a + r * (b - a)
    cands = [a, b, 0.5 * (a + b)]
    return max(cands, key=q)
