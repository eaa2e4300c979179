"""Problem entities and the per-period cost model.

Periods are working days numbered from 1.  A customer whose deadline is
``delta`` can be completed in any period ``t <= delta`` without
inconvenience; every period it stays open from ``delta`` onward adds
``eta ** (t - delta + 1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, FeasibilityError, ProtocolError


class Task(enum.Enum):
    EASY = "easy"
    ADVANCED = "advanced"


class Skill(enum.Enum):
    REGULAR = "regular"
    EXPERT = "expert"


@dataclass(frozen=True)
class Customer:
    id: int
    x: float
    y: float
    task: Task
    arrival_period: int
    deadline: int
    visits_so_far: int = 0

    @property
    def location(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def advanced(self) -> bool:
        return self.task is Task.ADVANCED


@dataclass(frozen=True)
class Technician:
    id: int
    skill: Skill

    @property
    def b(self) -> int:
        return int(self.skill is Skill.EXPERT)


@dataclass(frozen=True)
class DecisionState:
    """Everything a policy sees at the start of one period.

    Customers are kept sorted by id and technicians by id; the kernels rely on
    that ordering for deterministic tie-breaking.
    """

    period: int
    available_technicians: tuple[Technician, ...]
    customers: tuple[Customer, ...]
    rework_prob: float = 0.5
    cutoff_period: int = 16
    penalty_base: float = 1.1
    work_limit: float = 420.0
    speed_kmh: float = 60.0
    service_minutes: float = 30.0
    depot: tuple[float, float] = (100.0, 100.0)

    def __post_init__(self):
        for c in self.customers:
            if c.arrival_period > self.period:
                raise ProtocolError(
                    f"customer {c.id} arrives in period {c.arrival_period} > {self.period}"
                )
        ids = [c.id for c in self.customers]
        if ids != sorted(ids):
            object.__setattr__(
                self, "customers", tuple(sorted(self.customers, key=lambda c: c.id))
            )
        tids = [w.id for w in self.available_technicians]
        if tids != sorted(tids):
            object.__setattr__(
                self,
                "available_technicians",
                tuple(sorted(self.available_technicians, key=lambda w: w.id)),
            )

    @cached_property
    def customer_by_id(self) -> dict[int, Customer]:
        return {c.id: c for c in self.customers}

    @cached_property
    def technician_by_id(self) -> dict[int, Technician]:
        return {w.id: w for w in self.available_technicians}

    @cached_property
    def travel(self):
        from .routing import TravelModel

        return TravelModel.from_customers(
            self.customers, self.speed_kmh, self.service_minutes, self.depot
        )

    @cached_property
    def arrays(self) -> "StateArrays":
        cs = self.customers
        return StateArrays(
            ids=np.fromiter((c.id for c in cs), np.int64, len(cs)),
            x=np.fromiter((c.x for c in cs), np.float64, len(cs)),
            y=np.fromiter((c.y for c in cs), np.float64, len(cs)),
            deadline=np.fromiter((c.deadline for c in cs), np.int64, len(cs)),
            arrival=np.fromiter((c.arrival_period for c in cs), np.int64, len(cs)),
            advanced=np.fromiter((c.advanced for c in cs), np.bool_, len(cs)),
            tech_ids=np.fromiter(
                (w.id for w in self.available_technicians),
                np.int64,
                len(self.available_technicians),
            ),
            expert=np.fromiter(
                (w.skill is Skill.EXPERT for w in self.available_technicians),
                np.bool_,
                len(self.available_technicians),
            ),
        )

    def risk(self, tech: Technician, customer: Customer) -> float:
        """Probability that the visit leaves the task unresolved."""
        if customer.advanced and tech.skill is Skill.REGULAR:
            return self.rework_prob
        return 0.0


@dataclass(frozen=True)
class StateArrays:
    ids: np.ndarray
    x: np.ndarray
    y: np.ndarray
    deadline: np.ndarray
    arrival: np.ndarray
    advanced: np.ndarray
    tech_ids: np.ndarray
    expert: np.ndarray


@dataclass(frozen=True)
class Decision:
    """Ordered customer ids per technician; depot start/end is implicit."""

    routes: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "routes", {int(w): tuple(int(i) for i in r) for w, r in self.routes.items()}
        )

    @classmethod
    def empty(cls, technicians: Iterable[Technician]) -> "Decision":
        return cls({w.id: () for w in technicians})

    def routed_customers(self) -> list[int]:
        return [i for r in self.routes.values() for i in r]

    def technician_of(self) -> dict[int, int]:
        return {i: w for w, r in self.routes.items() for i in r}

    def with_route(self, tech_id: int, route: Iterable[int]) -> "Decision":
        routes = dict(self.routes)
        routes[tech_id] = tuple(route)
        return Decision(routes)

    def __eq__(self, other):
        if not isinstance(other, Decision):
            return NotImplemented
        strip = lambda d: {w: r for w, r in d.routes.items() if r}  # noqa: E731
        return strip(self) == strip(other)

    def __hash__(self):
        return hash(tuple(sorted((w, r) for w, r in self.routes.items() if r)))


@dataclass(frozen=True)
class PostDecisionState:
    period: int
    unassigned: frozenset[int]
    risky_assigned: frozenset[int]
    safe_assigned: frozenset[int]


@dataclass(frozen=True)
class StochasticInfo:
    available_next: tuple[Technician, ...]
    new_customers: tuple[Customer, ...]
    failed_risky: frozenset[int]


def _check_eta(eta: float) -> None:
    if not eta > 1.0:
        raise ConfigurationError(f"penalty base eta must exceed 1, got {eta}")


def inconvenience_increase(deadline: int, t: int, eta: float) -> float:
    """Cost-side increase ``f_i(t)``; zero until the deadline is due."""
    _check_eta(eta)
    if deadline > t:
        return 0.0
    return eta ** (t - deadline + 1)


def post_decision(state: DecisionState, decision: Decision) -> PostDecisionState:
    from .routing import validate_decision

    bad = [ev for ev in validate_decision(state, decision).values() if not ev.feasible]
    if bad:
        raise FeasibilityError(f"infeasible decision: {bad[0].violated}", bad[0].violated)
    owner = decision.technician_of()
    unassigned, risky, safe = set(), set(), set()
    for c in state.customers:
        w = owner.get(c.id)
        if w is None:
            unassigned.add(c.id)
        elif state.risk(state.technician_by_id[w], c) > 0:
            risky.add(c.id)
        else:
            safe.add(c.id)
    return PostDecisionState(
        state.period, frozenset(unassigned), frozenset(risky), frozenset(safe)
    )


def expected_immediate_cost(state: DecisionState, decision: Decision) -> float:
    post = post_decision(state, decision)
    by_id = state.customer_by_id
    t, eta, p = state.period, state.penalty_base, state.rework_prob
    cost = sum(inconvenience_increase(by_id[i].deadline, t, eta) for i in sorted(post.unassigned))
    cost += p * sum(
        inconvenience_increase(by_id[i].deadline, t, eta) for i in sorted(post.risky_assigned)
    )
    return cost


def realized_cost(
    post: PostDecisionState,
    info: StochasticInfo,
    eta: float,
    deadlines: Mapping[int, int],
) -> float:
    """Realized cost of the transition out of ``post``.

    ``deadlines`` maps every open customer id to its deadline period.
    """
    if not info.failed_risky <= post.risky_assigned:
        extra = sorted(info.failed_risky - post.risky_assigned)
        raise ProtocolError(f"failed customers {extra} were not risky assignments")
    charged = sorted(post.unassigned | info.failed_risky)
    return sum(inconvenience_increase(deadlines[i], post.period, eta) for i in charged)
