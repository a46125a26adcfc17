"""Age vectors of buffered packets, their truncated state space and kernel.

An age vector ``(d_1, ..., d_b)`` lists the ages of the ``b`` packets held
in a receiver buffer, freshest first.  A delivery pushes a fresh packet of
age 1 and drops the oldest one; every other slot ages each packet by one.
Ages saturate at ``delta_max`` so the state space stays finite, which is
the only way two entries can become equal.

The initial state is ``(1, 2, ..., b)``: as if ``b`` back-to-back
deliveries had just occurred.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

AgeVector = tuple[int, ...]

DEFAULT_DELTA_MAX = 100
DEFAULT_STATE_BUDGET = 10**6


class StateSpaceCapacityError(RuntimeError):
    pass


def initial_state(b: int) -> AgeVector:
    return tuple(range(1, b + 1))


def is_valid(ages: Sequence[int], delta_max: int) -> bool:
    """Ages in ``[1, delta_max]``, strictly increasing except ties at the cap."""
    if len(ages) == 0:
        return False
    if any(d < 1 or d > delta_max for d in ages):
        return False
    for lo, hi in zip(ages, ages[1:]):
        if hi < lo or (hi == lo and lo != delta_max):
            return False
    return True


def advance(state: Sequence[int], scheduled: int, success: int, delta_max: int) -> AgeVector:
    if scheduled and success:
        return (1,) + tuple(min(d + 1, delta_max) for d in state[:-1])
    return tuple(min(d + 1, delta_max) for d in state)


@dataclass(frozen=True)
class TransitionModel:
    success_prob: float
    delta_max: int = DEFAULT_DELTA_MAX

    def __post_init__(self) -> None:
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError(f"success_prob must lie in [0, 1], got {self.success_prob}")


class StateSpace:
    """Dense enumeration of the age vectors reachable from the initial state.

    Besides the tuple list and its inverse index, it keeps the successor
    tables ``on_success`` / ``on_failure`` as integer arrays, which is all
    the solvers and the simulator need.
    """

    def __init__(self, b: int, delta_max: int, states: list[AgeVector]):
        self.b = b
        self.delta_max = delta_max
        self.states = states
        self._index = {s: i for i, s in enumerate(states)}
        self.ages = np.array(states, dtype=np.int64).reshape(len(states), b)
        self.on_success = np.array(
            [self._index[advance(s, 1, 1, delta_max)] for s in states], dtype=np.int64
        )
        self.on_failure = np.array(
            [self._index[advance(s, 0, 0, delta_max)] for s in states], dtype=np.int64
        )
        self.head_age = self.ages[:, 0].copy()
        for arr in (self.ages, self.on_success, self.on_failure, self.head_age):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __contains__(self, ages) -> bool:
        return tuple(ages) in self._index

    def index_of(self, ages: Sequence[int]) -> int:
        try:
            return self._index[tuple(ages)]
        except KeyError:
            raise KeyError(
                f"age vector {tuple(ages)} is not in the state space "
                f"(b={self.b}, delta_max={self.delta_max})"
            ) from None

    @property
    def initial(self) -> int:
        return self._index[initial_state(self.b)]

    def legend_rows(self):
        for i, s in enumerate(self.states):
            yield i, " ".join(str(d) for d in s)


def enumerate_states(
    b: int, delta_max: int = DEFAULT_DELTA_MAX, budget: int = DEFAULT_STATE_BUDGET
) -> StateSpace:
    """Breadth-first closure of the initial state under :func:`advance`."""
    if b < 1:
        raise ValueError("buffer size must be >= 1")
    if delta_max < b + 1:
        raise ValueError(f"delta_max must be >= b + 1 = {b + 1}, got {delta_max}")
    start = initial_state(b)
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for nxt in (advance(s, 1, 1, delta_max), advance(s, 0, 0, delta_max)):
            if nxt not in seen:
                if len(seen) >= budget:
                    raise StateSpaceCapacityError(
                        f"state space for b={b}, delta_max={delta_max} exceeds "
                        f"budget of {budget} states"
                    )
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
    # canonical order: lexicographic, so ids do not depend on traversal details
    order.sort()
    return StateSpace(b, delta_max, order)


def transition_distribution(
    state: Sequence[int], action: int, model: TransitionModel
) -> list[tuple[AgeVector, float]]:
    state = tuple(state)
    if not action:
        return [(advance(state, 0, 0, model.delta_max), 1.0)]
    p = model.success_prob
    hit = advance(state, 1, 1, model.delta_max)
    miss = advance(state, 1, 0, model.delta_max)
    out = []
    if p > 0.0:
        out.append((hit, p))
    if p < 1.0:
        out.append((miss, 1.0 - p))
    return out
