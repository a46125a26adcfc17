"""Stationary autoregressive sources and the MMSE error of buffered samples.

The receiver holds the ``b`` most recently delivered samples of a scalar
Gaussian AR(q) process.  With an age vector ``(d_1, ..., d_b)`` the best
linear (and, for Gaussian noise, best overall) estimate of ``X_t`` from
``X_{t-d_1}, ..., X_{t-d_b}`` has error

    gamma(0) - c^T Sigma^{-1} c,   c_i = gamma(d_i),  Sigma_ij = gamma(|d_i - d_j|)

where ``gamma`` is the autocovariance of the process.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import lfilter

JITTER = 1e-10


class NumericalError(RuntimeError):
    """A linear system that should be well posed turned out singular."""


@dataclass(frozen=True)
class ArSourceModel:
    """Scalar AR(q) source ``X_t = sum_i a_i X_{t-i} + W_t``.

    ``coeffs[i - 1]`` is the lag-``i`` coefficient.  ``success_prob`` is the
    per-slot delivery probability of the channel the sensor transmits on.
    """

    order: int
    coeffs: tuple[float, ...]
    noise_var: float = 1.0
    success_prob: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"order must be a positive integer, got {self.order!r}")
        if len(self.coeffs) != self.order:
            raise ValueError(
                f"expected {self.order} coefficients, got {len(self.coeffs)}"
            )
        if not all(math.isfinite(c) for c in self.coeffs):
            raise ValueError("coefficients must be finite")
        if not (self.noise_var > 0 and math.isfinite(self.noise_var)):
            raise ValueError(f"noise_var must be positive, got {self.noise_var!r}")
        if not (0.0 < self.success_prob <= 1.0):
            raise ValueError(
                f"success_prob must lie in (0, 1], got {self.success_prob!r}"
            )
        rho = self.spectral_radius()
        if rho >= 1.0:
            raise ValueError(
                f"non-stationary AR model: companion spectral radius {rho:.6g} >= 1"
            )

    def companion(self) -> np.ndarray:
        q = self.order
        A = np.zeros((q, q))
        A[0, :] = self.coeffs
        if q > 1:
            A[1:, :-1] = np.eye(q - 1)
        return A

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))

    def with_success_prob(self, p: float) -> "ArSourceModel":
        return ArSourceModel(self.order, self.coeffs, self.noise_var, p)

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "coeffs": list(self.coeffs),
            "noise_var": self.noise_var,
            "success_prob": self.success_prob,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArSourceModel":
        allowed = {"order", "coeffs", "noise_var", "success_prob"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown model key(s): {', '.join(sorted(unknown))}")
        if "coeffs" not in data:
            raise ValueError("model is missing 'coeffs'")
        coeffs = data["coeffs"]
        return cls(
            order=int(data.get("order", len(coeffs))),
            coeffs=tuple(coeffs),
            noise_var=float(data.get("noise_var", 1.0)),
            success_prob=float(data.get("success_prob", 1.0)),
        )


def load_model(path: str | Path) -> ArSourceModel:
    with open(path, encoding="utf-8") as fh:
        return ArSourceModel.from_dict(json.load(fh))


def reference_model(success_prob: float = 0.8) -> ArSourceModel:
    """The AR(4) benchmark ``X_t = 0.1 X_{t-1} + 0.8 X_{t-4} + W_t``."""
    return ArSourceModel(4, (0.1, 0.0, 0.0, 0.8), 1.0, success_prob)


@dataclass(frozen=True)
class AutocovarianceTable:
    gamma: np.ndarray
    model: ArSourceModel = field(repr=False, compare=False)

    @property
    def max_lag(self) -> int:
        return len(self.gamma) - 1

    def __getitem__(self, k):
        return self.gamma[k]

    def extended(self, max_lag: int) -> "AutocovarianceTable":
        """Return a table covering at least ``max_lag`` lags."""
        if max_lag <= self.max_lag:
            return self
        g = list(self.gamma)
        a = self.model.coeffs
        for k in range(len(g), max_lag + 1):
            g.append(sum(a[i] * g[k - 1 - i] for i in range(len(a))))
        return AutocovarianceTable(np.asarray(g), self.model)


def yule_walker_autocovariance(model: ArSourceModel, max_lag: int) -> AutocovarianceTable:
    """Autocovariance ``gamma[0..max_lag]`` of a stationary AR model.

    Solves the (q+1)-dimensional Yule-Walker system for ``gamma[0..q]`` and
    extends by the AR recursion beyond lag ``q``.
    """
    q = model.order
    if max_lag < q:
        raise ValueError(f"max_lag ({max_lag}) must be >= model order ({q})")
    a = model.coeffs
    # row k: gamma(k) - sum_i a_i gamma(|k - i|) = [k == 0] * sigma^2
    A = np.eye(q + 1)
    for k in range(q + 1):
        for i in range(1, q + 1):
            A[k, abs(k - i)] -= a[i - 1]
    rhs = np.zeros(q + 1)
    rhs[0] = model.noise_var
    if np.linalg.cond(A) > 1e12:
        raise NumericalError("Yule-Walker system is numerically singular")
    g = np.linalg.solve(A, rhs)
    return AutocovarianceTable(g, model).extended(max_lag)


def _conditional_variance(table: AutocovarianceTable, lags: np.ndarray) -> float:
    g = table.gamma
    c = g[lags]
    cov = g[np.abs(lags[:, None] - lags[None, :])]
    for jitter in (0.0, JITTER):
        try:
            L = np.linalg.cholesky(cov + jitter * np.eye(len(lags)))
        except np.linalg.LinAlgError:
            continue
        z = np.linalg.solve(L, c)
        return float(g[0] - z @ z)
    raise NumericalError(f"covariance of lags {lags.tolist()} is singular")


def mmse_error(
    model: ArSourceModel,
    table: AutocovarianceTable | None,
    ages: Sequence[int],
) -> float:
    """Conditional variance of ``X_t`` given the buffered samples ``X_{t-d}``."""
    lags = np.unique(np.asarray(ages, dtype=np.int64))
    if lags.size == 0 or lags[0] < 1:
        raise ValueError(f"ages must be >= 1, got {tuple(ages)}")
    if table is None:
        table = yule_walker_autocovariance(model, max(model.order, int(lags[-1])))
    table = table.extended(int(lags[-1]))
    return _conditional_variance(table, lags)


class ErrorTable:
    """Estimation error of every state in a state space, indexed by state id."""

    def __init__(self, states, values: np.ndarray, model: ArSourceModel):
        self.states = states
        self.values = np.asarray(values, dtype=np.float64)
        self.model = model
        self.values.setflags(write=False)

    def __getitem__(self, ages) -> float:
        return float(self.values[self.states.index_of(ages)])

    def __len__(self) -> int:
        return len(self.values)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {s: float(v) for s, v in zip(self.states.states, self.values)}


def build_error_table(model: ArSourceModel, states) -> ErrorTable:
    """Evaluate :func:`mmse_error` on every state of ``states``.

    States with distinct ages are solved in one batched Cholesky per buffer
    width; saturated states with repeated ages go through the scalar path.
    """
    ages = states.ages
    table = yule_walker_autocovariance(model, max(model.order, int(ages.max())))
    g = table.gamma
    out = np.empty(len(ages))
    distinct = np.all(np.diff(ages, axis=1) > 0, axis=1) if ages.shape[1] > 1 else np.ones(len(ages), bool)
    idx = np.flatnonzero(distinct)
    if idx.size:
        lags = ages[idx]
        c = g[lags]
        cov = g[np.abs(lags[:, :, None] - lags[:, None, :])]
        try:
            L = np.linalg.cholesky(cov)
            z = np.linalg.solve(L, c[:, :, None])[:, :, 0]
            out[idx] = g[0] - np.einsum("ij,ij->i", z, z)
        except np.linalg.LinAlgError:
            distinct[:] = False
    for i in np.flatnonzero(~distinct):
        try:
            out[i] = _conditional_variance(table, np.unique(ages[i]))
        except NumericalError as exc:
            raise NumericalError(f"state {states.states[i]}: {exc}") from exc
    return ErrorTable(states, out, model)


def simulate_ar(model: ArSourceModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` consecutive samples of the stationary process."""
    rho = model.spectral_radius()
    burn = model.order + (int(math.ceil(math.log(1e-14) / math.log(rho))) if rho > 0 else 0)
    w = rng.normal(0.0, math.sqrt(model.noise_var), size=n + burn)
    x = lfilter([1.0], np.concatenate(([1.0], -np.asarray(model.coeffs))), w)
    return x[burn:]


def monte_carlo_error(
    model: ArSourceModel,
    ages: Iterable[int],
    n_samples: int = 1_000_000,
    seed: int = 0,
    n_batches: int = 100,
) -> tuple[float, float]:
    """Empirical MSE of the least-squares predictor of ``X_t`` from lags ``ages``.

    The predictor is fitted on the simulated path itself.  The standard error
    uses non-overlapping batch means, since residuals at nearby times are
    correlated whenever the lag set is not the exact regressor set.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    lags = np.unique(np.asarray(list(ages), dtype=np.int64))
    if lags.size == 0 or lags[0] < 1:
        raise ValueError("ages must be >= 1")
    rng = np.random.default_rng(seed)
    dmax = int(lags[-1])
    x = simulate_ar(model, n_samples + dmax, rng)
    y = x[dmax:]
    X = np.stack([x[dmax - d : dmax - d + n_samples] for d in lags], axis=1)
    coef = np.linalg.solve(X.T @ X, X.T @ y)
    sq = (y - X @ coef) ** 2
    batches = sq[: (n_samples // n_batches) * n_batches].reshape(n_batches, -1).mean(axis=1)
    return float(sq.mean()), float(batches.std(ddof=1) / math.sqrt(n_batches))
