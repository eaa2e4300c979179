"""Episode driver: decide, realize rework outcomes, charge costs, transition."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass

from .domain import (
    Customer,
    Decision,
    DecisionState,
    PostDecisionState,
    StochasticInfo,
    inconvenience_increase,
    post_decision,
    realized_cost,
)
from .instances import InstanceRealization
from .policies import PolicyKind, dispatch, policy_alpha, policy_name
from .routing import route_duration

log = logging.getLogger(__name__)

SAFETY_CAP = 400


@dataclass(frozen=True)
class CustomerRecord:
    id: int
    x: float
    y: float
    task: str
    arrival: int
    deadline: int
    completion: int | None
    visits: int
    inconvenience: float

    @property
    def delay(self) -> int:
        return max(0, (self.completion or 0) - self.deadline)


@dataclass(frozen=True)
class PeriodRecord:
    period: int
    open_customers: int
    realized_cost: float
    available: tuple[int, ...]
    minutes: tuple[float, ...]  # aligned with ``available``
    routed: int
    risky: int
    failed: int
    alpha: float | None


@dataclass(frozen=True)
class EpisodeResult:
    policy: str
    seed: int
    arrival_days: int
    customers: tuple[CustomerRecord, ...]
    periods: tuple[PeriodRecord, ...]
    final_period: int
    divergent: bool = False
    routes: tuple[tuple[int, Decision], ...] = ()

    @property
    def total_inconvenience(self) -> float:
        return sum(p.realized_cost for p in self.periods)

    @property
    def leftover_days(self) -> int:
        return max(0, self.final_period - self.arrival_days)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["routes"] = [[t, {str(w): list(r) for w, r in sorted(dec.routes.items())}]
                       for t, dec in self.routes]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def initial_state(realization: InstanceRealization) -> DecisionState:
    return make_state(realization, 1, realization.arrivals_in(1))


def make_state(realization: InstanceRealization, period: int, customers) -> DecisionState:
    cfg = realization.config
    return DecisionState(
        period=period,
        available_technicians=realization.available(period),
        customers=tuple(customers),
        rework_prob=cfg.rework_prob,
        cutoff_period=cfg.cutoff_period,
        penalty_base=cfg.eta,
        work_limit=cfg.work_limit_minutes,
        speed_kmh=cfg.speed_kmh,
        service_minutes=cfg.service_minutes,
        depot=cfg.depot,
    )


def resolve(
    state: DecisionState, post: PostDecisionState, realization: InstanceRealization
) -> StochasticInfo:
    """Stochastic information revealed after the period's visits."""
    by_id = state.customer_by_id
    p = state.rework_prob
    failed = frozenset(
        i for i in post.risky_assigned
        if realization.rework_uniform(i, by_id[i].visits_so_far) < p
    )
    nxt = state.period + 1
    return StochasticInfo(
        available_next=realization.available(nxt),
        new_customers=realization.arrivals_in(nxt),
        failed_risky=failed,
    )


def transition(state: DecisionState, post: PostDecisionState, info: StochasticInfo,
               realization: InstanceRealization) -> DecisionState:
    by_id = state.customer_by_id
    survivors = [by_id[i] for i in post.unassigned]
    survivors += [
        dataclasses.replace(by_id[i], visits_so_far=by_id[i].visits_so_far + 1)
        for i in info.failed_risky
    ]
    return dataclasses.replace(
        state,
        period=state.period + 1,
        available_technicians=info.available_next,
        customers=tuple(sorted(survivors + list(info.new_customers), key=lambda c: c.id)),
    )


def step(
    state: DecisionState, decision: Decision, realization: InstanceRealization
) -> tuple[float, DecisionState]:
    """Apply ``decision``; raises FeasibilityError instead of repairing it."""
    post = post_decision(state, decision)
    info = resolve(state, post, realization)
    deadlines = {c.id: c.deadline for c in state.customers}
    cost = realized_cost(post, info, state.penalty_base, deadlines)
    return cost, transition(state, post, info, realization)


def run_episode(
    realization: InstanceRealization, policy: PolicyKind, record_routes: bool = False
) -> EpisodeResult:
    cfg = realization.config
    eta = cfg.eta
    records: dict[int, dict] = {}
    periods = []
    routes = []
    state = initial_state(realization)
    divergent = False
    for c in state.customers:
        records[c.id] = {"c": c, "completion": None, "visits": 0, "inc": 0.0}
    while True:
        t = state.period
        if t >= cfg.cutoff_period and not state.customers:
            break
        if t > SAFETY_CAP:
            log.warning("episode seed=%s hit the %d-period safety cap", cfg.seed, SAFETY_CAP)
            divergent = True
            break
        alpha = policy_alpha(policy, state)
        decision = dispatch(policy, state, alpha)
        post = post_decision(state, decision)
        info = resolve(state, post, realization)
        by_id = state.customer_by_id
        cost = 0.0
        for i in sorted(post.unassigned | info.failed_risky):
            inc = inconvenience_increase(by_id[i].deadline, t, eta)
            records[i]["inc"] += inc
            cost += inc
        for i in post.safe_assigned | post.risky_assigned:
            records[i]["visits"] += 1
            if i not in info.failed_risky:
                records[i]["completion"] = t
        travel = state.travel
        avail = tuple(w.id for w in state.available_technicians)
        minutes = tuple(route_duration(decision.routes.get(w, ()), travel) for w in avail)
        periods.append(PeriodRecord(
            period=t,
            open_customers=len(state.customers),
            realized_cost=cost,
            available=avail,
            minutes=minutes,
            routed=len(post.safe_assigned) + len(post.risky_assigned),
            risky=len(post.risky_assigned),
            failed=len(info.failed_risky),
            alpha=alpha,
        ))
        if record_routes:
            routes.append((t, decision))
        state = transition(state, post, info, realization)
        for c in info.new_customers:
            records[c.id] = {"c": c, "completion": None, "visits": 0, "inc": 0.0}

    customers = tuple(
        CustomerRecord(
            id=r["c"].id, x=r["c"].x, y=r["c"].y, task=r["c"].task.value,
            arrival=r["c"].arrival_period, deadline=r["c"].deadline,
            completion=r["completion"], visits=r["visits"], inconvenience=r["inc"],
        )
        for _, r in sorted(records.items())
    )
    return EpisodeResult(
        policy=policy_name(policy),
        seed=cfg.seed,
        arrival_days=cfg.arrival_days,
        customers=customers,
        periods=tuple(periods),
        final_period=periods[-1].period if periods else 0,
        divergent=divergent,
        routes=tuple(routes),
    )
