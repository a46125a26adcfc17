"""Maximum Gain First scheduling, baseline schedulers and the slot simulator.

Each slot the simulator charges every sensor its current estimation error,
asks the policy for at most ``M`` sensors, draws channel outcomes for them
and advances every buffer's age vector.

Channel outcomes come from one uniform per (replication, slot, sensor),
drawn whether or not the sensor is scheduled.  Two policies run with the
same seed therefore see exactly the same channel realizations.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .aoi import DEFAULT_DELTA_MAX, StateSpace, enumerate_states
from .mdp import QTable
from .source import ArSourceModel, ErrorTable, build_error_table

CHUNK_SLOTS = 8192


class PolicyKind(enum.Enum):
    MGF = "mgf"
    MAX_AGE_FIRST = "maf"
    ROUND_ROBIN = "rr"
    RANDOM_M = "rand"
    NEVER = "never"

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        try:
            return cls(name.lower())
        except ValueError:
            valid = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown policy {name!r}; valid names: {valid}") from None


_CODES = {
    PolicyKind.MGF: _kernels.MGF,
    PolicyKind.MAX_AGE_FIRST: _kernels.MAX_AGE,
    PolicyKind.ROUND_ROBIN: _kernels.ROUND_ROBIN,
    PolicyKind.RANDOM_M: _kernels.RANDOM_M,
    PolicyKind.NEVER: _kernels.NEVER,
}


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SchedulerDecision:
    scheduled: frozenset[int]


def mgf_select(gains: Sequence[float], M: int, head_ages: Sequence[int] | None = None) -> SchedulerDecision:
    """Pick at most ``M`` sensors with the largest non-negative gains.

    Ties go to the larger head age, then the lower index.
    """
    gains = [float(g) for g in gains]
    if not all(math.isfinite(g) for g in gains):
        raise ValueError("gains must be finite")
    heads = list(head_ages) if head_ages is not None else [0] * len(gains)
    eligible = [n for n, g in enumerate(gains) if g >= 0.0]
    eligible.sort(key=lambda n: (-gains[n], -heads[n], n))
    return SchedulerDecision(frozenset(eligible[:M]))


@dataclass
class SimConfig:
    sensors: list[ArSourceModel]
    M: int = 1
    b: int = 1
    gamma: float = 0.99
    horizon: int = 100_000
    replications: int = 10
    seed: int = 0
    delta_max: int = DEFAULT_DELTA_MAX
    warmup: int | None = None  # None -> 10 * b

    def __post_init__(self) -> None:
        if not self.sensors:
            raise ConfigurationError("at least one sensor is required")
        if self.M < 1:
            raise ConfigurationError("M must be >= 1")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in [0, 1)")
        if self.effective_warmup >= self.horizon:
            raise ConfigurationError(
                f"warmup ({self.effective_warmup}) must be shorter than the horizon ({self.horizon})"
            )

    @property
    def effective_warmup(self) -> int:
        return 10 * self.b if self.warmup is None else int(self.warmup)

    @property
    def N(self) -> int:
        return len(self.sensors)

    @property
    def common_p(self) -> float | None:
        ps = {m.success_prob for m in self.sensors}
        return ps.pop() if len(ps) == 1 else None


@dataclass
class SimResult:
    policy: str
    avg_error: float
    stderr: float
    ci_halfwidth: float
    discounted_error: float
    discounted_stderr: float
    sched_rates: np.ndarray
    per_replication: np.ndarray = field(repr=False)
    max_scheduled: int = 0
    visits: np.ndarray = field(default=None, repr=False)
    p: float | None = None
    buffer: int = 1


def _summary(x: np.ndarray) -> tuple[float, float, float]:
    mean = float(np.mean(x))
    if len(x) < 2:
        return mean, 0.0, 0.0
    se = float(np.std(x, ddof=1) / math.sqrt(len(x)))
    return mean, se, float(stats.t.ppf(0.975, len(x) - 1) * se)


def _stream(seed: int, rep: int, kind: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), rep, kind])))


def build_tables(cfg: SimConfig, states: StateSpace | None = None) -> tuple[StateSpace, list[ErrorTable]]:
    states = states or enumerate_states(cfg.b, cfg.delta_max)
    cache: dict[tuple, ErrorTable] = {}
    tables = []
    for m in cfg.sensors:
        key = (m.coeffs, m.noise_var)
        if key not in cache:
            cache[key] = build_error_table(m, states)
        tables.append(cache[key])
    return states, tables


def simulate(
    cfg: SimConfig,
    policy: PolicyKind | str,
    lambda_star: float | None = None,
    q_tables: Sequence[QTable] | None = None,
    states: StateSpace | None = None,
    error_tables: Sequence[ErrorTable] | None = None,
) -> SimResult:
    policy = PolicyKind.parse(policy) if isinstance(policy, str) else policy
    if states is None or error_tables is None:
        states, error_tables = build_tables(cfg, states)
    N, S = cfg.N, len(states)
    if states.b != cfg.b or states.delta_max != cfg.delta_max:
        raise ConfigurationError("state space does not match the simulation config")
    gain_tab = np.zeros((N, S))
    if policy is PolicyKind.MGF:
        if q_tables is None or lambda_star is None:
            raise ConfigurationError("MGF needs lambda_star and one Q-table per sensor")
        if len(q_tables) != N:
            raise ConfigurationError(f"expected {N} Q-tables, got {len(q_tables)}")
        for n, q in enumerate(q_tables):
            if q.consistent_with.lam != lambda_star:
                raise ConfigurationError(f"Q-table of sensor {n} was solved at lambda={q.consistent_with.lam}, not {lambda_star}")
            if q.q.shape[0] != S:
                raise ConfigurationError(f"Q-table of sensor {n} does not match the state space")
            gain_tab[n] = q.gains
    err_tab = np.stack([np.asarray(e.values) for e in error_tables])
    p = np.array([m.success_prob for m in cfg.sensors])
    R, T, warmup = cfg.replications, cfg.horizon, cfg.effective_warmup

    state = np.full((R, N), states.initial, dtype=np.int64)
    acc_err = np.zeros(R)
    acc_disc = np.zeros(R)
    sched = np.zeros((R, N), dtype=np.int64)
    visits = np.zeros((N, S), dtype=np.int64)
    max_sched = np.zeros(1, dtype=np.int64)
    chan = [_stream(cfg.seed, r, 0) for r in range(R)]
    pick = [_stream(cfg.seed, r, 1) for r in range(R)] if policy is PolicyKind.RANDOM_M else None
    code = _CODES[policy]
    for t0 in range(0, T, CHUNK_SLOTS):
        n_slots = min(CHUNK_SLOTS, T - t0)
        uniforms = np.stack([g.random((n_slots, N)) for g in chan])
        if pick is not None:
            keys = np.stack([g.random((n_slots, N)) for g in pick])
        else:
            keys = np.zeros((R, 1, N))
        _kernels.simulate_chunk_kernel(
            code, cfg.M, t0, n_slots, warmup, cfg.gamma, err_tab, gain_tab,
            states.on_success, states.on_failure, states.head_age, p,
            uniforms, keys, state, acc_err, acc_disc, sched, visits, max_sched,
        )
    if max_sched[0] > cfg.M:
        raise AssertionError(f"scheduler exceeded the channel count: {max_sched[0]} > {cfg.M}")
    counted = T - warmup
    per_rep = acc_err / (counted * N)
    avg, se, hw = _summary(per_rep)
    disc, disc_se, _ = _summary(acc_disc)
    return SimResult(
        policy=policy.value,
        avg_error=avg,
        stderr=se,
        ci_halfwidth=hw,
        discounted_error=disc,
        discounted_stderr=disc_se,
        sched_rates=sched.mean(axis=0) / counted,
        per_replication=per_rep,
        max_scheduled=int(max_sched[0]),
        visits=visits,
        p=cfg.common_p,
        buffer=cfg.b,
    )


def evaluate_policy_suite(
    cfg: SimConfig,
    policies: Sequence[PolicyKind | str],
    lambda_star: float | None = None,
    q_tables: Sequence[QTable] | None = None,
) -> list[SimResult]:
    """Run several policies on identical channel realizations."""
    states, tables = build_tables(cfg)
    return [
        simulate(cfg, pol, lambda_star, q_tables, states=states, error_tables=tables)
        for pol in policies
    ]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def result_header(n_sensors: int, extra: Sequence[str] = ()) -> list[str]:
    return (
        ["policy", "p", "buffer", "avg_error", "stderr", "discounted_error"]
        + [f"sched_rate_sensor_{n + 1}" for n in range(n_sensors)]
        + list(extra)
    )


def result_row(res: SimResult) -> list[str]:
    return [res.policy, fmt(res.p), str(res.buffer), fmt(res.avg_error), fmt(res.stderr), fmt(res.discounted_error)] + [
        fmt(r) for r in res.sched_rates
    ]


def write_results_csv(path: str | Path, results: Sequence[SimResult]) -> None:
    n = len(results[0].sched_rates) if results else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result_header(n))
        for res in results:
            w.writerow(result_row(res))
