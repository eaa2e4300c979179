"""Score-based assignment engine and the benchmark dispatch rules.

All policies build routes with cheapest insertion.  The score-based engine
repeatedly commits the feasible candidate with the highest score; the
myopic rules walk customers by deadline; the efficiency rules commit the
globally cheapest insertion first.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import _kernels
from .domain import Decision, DecisionState
from .errors import ConfigurationError



def score_time_unit(state: DecisionState) -> float:
    """Minutes per unit of insertion time inside the score.

    Insertion times are measured relative to the drive from the depot to a
    corner of the service area, which makes the score dimensionless.
    """
    return math.hypot(state.depot[0], state.depot[1]) / state.speed_kmh * 60.0


class Mask(enum.Enum):
    """Which (technician skill, customer task) pairs a policy may form."""

    ALL = "all"
    SAFE = "safe"  # no regular technician on an advanced task
    EXCLUSIVE = "exclusive"  # regular <-> easy, expert <-> advanced

    def permits(self, expert: bool, advanced: bool) -> bool:
        if self is Mask.ALL:
            return True
        if self is Mask.SAFE:
            return expert or not advanced
        return expert == advanced

    def matrix(self, expert: np.ndarray, advanced: np.ndarray) -> np.ndarray:
        e = expert[:, None]
        a = advanced[None, :]
        if self is Mask.ALL:
            return np.ones((expert.size, advanced.size), np.bool_)
        if self is Mask.SAFE:
            return e | ~a
        return e == a


def _decision_from(state: DecisionState, routes, lengths) -> Decision:
    arr = state.arrays
    out = {}
    for w, tid in enumerate(arr.tech_ids):
        out[int(tid)] = tuple(int(arr.ids[k]) for k in routes[w, : lengths[w]])
    return Decision(out)


def _greedy(state: DecisionState, alpha: float, mask: Mask, risk_aware: bool) -> Decision:
    arr = state.arrays
    if arr.ids.size == 0 or arr.tech_ids.size == 0:
        return Decision.empty(state.available_technicians)
    routes, lengths, _ = _kernels.greedy_assign(
        arr.x, arr.y, arr.deadline, arr.advanced, arr.expert,
        mask.matrix(arr.expert, arr.advanced),
        state.period, state.penalty_base, state.rework_prob, float(alpha), risk_aware,
        score_time_unit(state),
        state.depot[0], state.depot[1], state.speed_kmh, state.service_minutes,
        state.work_limit,
    )
    return _decision_from(state, routes, lengths)


def decide_score_based(state: DecisionState, alpha: float, mask: Mask = Mask.ALL) -> Decision:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    return _greedy(state, alpha, mask, risk_aware=True)


def decide_efficiency_only(state: DecisionState, mask: Mask = Mask.ALL) -> Decision:
    """Global greedy on raw insertion time; blind to deadlines and rework risk."""
    return _greedy(state, 1.0, mask, risk_aware=False)


def decide_myopic_deadline_first(state: DecisionState, mask: Mask) -> Decision:
    """Serve the longest-expired deadlines first, cheapest insertion within a deadline."""
    arr = state.arrays
    if arr.ids.size == 0 or arr.tech_ids.size == 0:
        return Decision.empty(state.available_technicians)
    routes, lengths, _ = _kernels.deadline_greedy_assign(
        arr.x, arr.y, arr.deadline, mask.matrix(arr.expert, arr.advanced), arr.expert,
        state.depot[0], state.depot[1], state.speed_kmh, state.service_minutes,
        state.work_limit,
    )
    return _decision_from(state, routes, lengths)


class Benchmark(enum.Enum):
    MYSF = "mysf"
    MYEX = "myex"
    MYEF = "myef"
    SF = "sf"
    EX = "ex"
    EF = "ef"


@dataclass(frozen=True)
class StaticBalance:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def name(self) -> str:
        return f"sb:{self.alpha:g}"


@dataclass(frozen=True, eq=False)
class DynamicBalance:
    model: object  # rl.model.PolicyModel
    source: str = ""

    @property
    def name(self) -> str:
        return f"db:{self.source}" if self.source else "db"


@dataclass(frozen=True)
class SampledBalance:
    """Training-time variant: alpha supplied per state by a callback."""

    alpha_fn: Callable[[DecisionState], float]
    name: str = "sampled"


PolicyKind = Union[Benchmark, StaticBalance, DynamicBalance, SampledBalance]

_BENCHMARK_MASK = {
    Benchmark.MYSF: Mask.SAFE,
    Benchmark.MYEX: Mask.EXCLUSIVE,
    Benchmark.MYEF: Mask.ALL,
    Benchmark.SF: Mask.SAFE,
    Benchmark.EX: Mask.EXCLUSIVE,
    Benchmark.EF: Mask.ALL,
}


def policy_name(policy: PolicyKind) -> str:
    if isinstance(policy, Benchmark):
        return policy.value
    return policy.name


def policy_alpha(policy: PolicyKind, state: DecisionState) -> float | None:
    """The balance parameter the policy uses in ``state`` (None for benchmarks)."""
    if isinstance(policy, StaticBalance):
        return policy.alpha
    if isinstance(policy, DynamicBalance):
        if policy.model is None:
            raise ConfigurationError("dynamic-balance policy has no model loaded")
        from .rl.model import lambda_deterministic

        return lambda_deterministic(policy.model, state)
    if isinstance(policy, SampledBalance):
        return policy.alpha_fn(state)
    return None


def dispatch(policy: PolicyKind, state: DecisionState, alpha: float | None = None) -> Decision:
    """Decision of ``policy`` in ``state``; ``alpha`` overrides the computed one."""
    if isinstance(policy, Benchmark):
        mask = _BENCHMARK_MASK[policy]
        if policy in (Benchmark.MYSF, Benchmark.MYEX, Benchmark.MYEF):
            return decide_myopic_deadline_first(state, mask)
        return decide_efficiency_only(state, mask)
    if alpha is None:
        alpha = policy_alpha(policy, state)
    return decide_score_based(state, alpha, Mask.ALL)


def parse_policy(spec: str) -> PolicyKind:
    """Parse ``mysf|myex|myef|sf|ex|ef|sb:<alpha>|db:<model-path>``."""
    spec = spec.strip()
    head, _, arg = spec.partition(":")
    head = head.lower()
    if head == "sb":
        try:
            return StaticBalance(float(arg))
        except ValueError:
            raise ConfigurationError(f"bad alpha in policy spec {spec!r}") from None
    if head == "db":
        if not arg:
            raise ConfigurationError("db policy needs a model path: db:<model-path>")
        from .rl.model import load_model

        return DynamicBalance(load_model(arg), source=arg)
    try:
        return Benchmark(head)
    except ValueError:
        raise ConfigurationError(f"unknown policy {spec!r}") from None


def grid_search_alpha(realizations, grid=None) -> tuple[float, list[tuple[float, float]]]:
    """Static alpha minimizing mean inconvenience per customer over ``realizations``.

    Ties go to the smaller alpha.
    """
    from .experiments.metrics import mean_inconvenience
    from .simulation import run_episode

    if grid is None:
        grid = [round(0.10 + 0.05 * k, 2) for k in range(11)]
    grid = list(grid)
    if not grid:
        raise ConfigurationError("empty alpha grid")
    realizations = list(realizations)
    if not realizations:
        raise ConfigurationError("grid search needs at least one instance")
    table = []
    for a in grid:
        results = [run_episode(r, StaticBalance(a)) for r in realizations]
        table.append((a, mean_inconvenience(results)))
    best = min(table, key=lambda row: (row[1], row[0]))
    return best[0], table
