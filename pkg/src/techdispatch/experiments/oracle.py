"""Exact finite-horizon values of tiny states by exhaustive backward induction.

Only practical for a handful of customers; used to check structural
properties of the value function (earlier deadlines never help, and serving
the more urgent of two twins is never worse).
"""

from __future__ import annotations

import dataclasses
import itertools
from functools import lru_cache

import numpy as np

from ..domain import Customer, DecisionState, Skill, Task, Technician, inconvenience_increase
from ..errors import ConfigurationError, OracleSizeError
from ..routing import TravelModel, route_duration

MAX_CUSTOMERS = 5
MAX_TECHNICIANS = 2
MAX_HORIZON = 3


class _Tree:
    def __init__(self, state: DecisionState, horizon: int, arrivals, availability):
        arrivals = {int(t): tuple(cs) for t, cs in (arrivals or {}).items()}
        customers = list(state.customers) + [c for cs in arrivals.values() for c in cs]
        techs = {w.id: w for w in state.available_technicians}
        for ws in (availability or {}).values():
            techs.update({w.id: w for w in ws})
        if horizon < 1:
            raise ConfigurationError("horizon must be at least 1")
        if (len(customers) > MAX_CUSTOMERS or len(techs) > MAX_TECHNICIANS
                or horizon > MAX_HORIZON):
            raise OracleSizeError(
                f"oracle limited to {MAX_CUSTOMERS} customers, {MAX_TECHNICIANS} technicians, "
                f"horizon {MAX_HORIZON}; got {len(customers)}, {len(techs)}, {horizon}")
        ids = [c.id for c in customers]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("customer ids must be unique across state and arrivals")
        self.state = state
        self.end = state.period + horizon
        self.arrivals = arrivals
        self.availability = {int(t): tuple(ws) for t, ws in (availability or {}).items()}
        self.by_id: dict[int, Customer] = {c.id: c for c in customers}
        self.travel = TravelModel.from_customers(
            customers, state.speed_kmh, state.service_minutes, state.depot)
        self.feasible_set = lru_cache(maxsize=None)(self._feasible_set)
        self.value = lru_cache(maxsize=None)(self._value)

    def techs_at(self, t: int) -> tuple[Technician, ...]:
        return self.availability.get(t, self.state.available_technicians)

    def f(self, cid: int, t: int) -> float:
        return inconvenience_increase(self.by_id[cid].deadline, t, self.state.penalty_base)

    def _feasible_set(self, members: frozenset) -> bool:
        """Some visiting order of ``members`` fits the work limit."""
        limit = self.state.work_limit
        return any(route_duration(p, self.travel) <= limit + 1e-9
                   for p in itertools.permutations(sorted(members)))

    def assignments(self, t: int, open_ids: frozenset):
        """Every feasible map technician -> customer set (order only matters for feasibility)."""
        techs = self.techs_at(t)
        opts = [None] + [w.id for w in techs]
        ids = sorted(open_ids)
        for choice in itertools.product(opts, repeat=len(ids)):
            sets = {w.id: frozenset(i for i, c in zip(ids, choice) if c == w.id) for w in techs}
            if all(not s or self.feasible_set(s) for s in sets.values()):
                yield sets

    def q(self, t: int, open_ids: frozenset, sets: dict) -> float:
        """Expected cost of committing ``sets`` in period t plus the optimal continuation."""
        p = self.state.rework_prob
        skill = {w.id: w for w in self.techs_at(t)}
        assigned = frozenset().union(*sets.values()) if sets else frozenset()
        unassigned = open_ids - assigned
        risky = sorted(i for w, s in sets.items() for i in s
                       if self.by_id[i].advanced and not skill[w].b)
        base = sum(self.f(i, t) for i in unassigned)
        incoming = frozenset(c.id for c in self.arrivals.get(t + 1, ()))
        total = 0.0
        for outcome in itertools.product((False, True), repeat=len(risky)):
            failed = frozenset(i for i, bad in zip(risky, outcome) if bad)
            prob = 1.0
            for bad in outcome:
                prob *= p if bad else 1.0 - p
            if prob == 0.0:
                continue
            cost = base + sum(self.f(i, t) for i in failed)
            total += prob * (cost + self.value(t + 1, unassigned | failed | incoming))
        return total

    def _value(self, t: int, open_ids: frozenset) -> float:
        if t >= self.end:
            return 0.0
        return min(self.q(t, open_ids, sets) for sets in self.assignments(t, open_ids))


def brute_force_value(state: DecisionState, horizon: int, arrivals=None, availability=None) -> float:
    """Optimal expected inconvenience over ``horizon`` periods starting at ``state``.

    ``arrivals`` maps period -> customers revealed then; ``availability`` maps
    period -> technicians on duty (default: those available in ``state``).
    Both are scripted, so the only randomness is the outcome of risky visits.
    """
    tree = _Tree(state, horizon, arrivals, availability)
    return tree.value(state.period, frozenset(c.id for c in state.customers))


def assignment_value(state: DecisionState, sets: dict, horizon: int, arrivals=None,
                     availability=None) -> float:
    """Expected cost of one particular first-period assignment, optimal afterwards.

    ``sets`` maps technician id -> iterable of customer ids; it must be feasible.
    """
    tree = _Tree(state, horizon, arrivals, availability)
    sets = {w.id: frozenset(sets.get(w.id, ())) for w in tree.techs_at(state.period)}
    if not all(not s or tree.feasible_set(s) for s in sets.values()):
        raise ConfigurationError("assignment violates the work limit")
    return tree.q(state.period, frozenset(c.id for c in state.customers), sets)


# -- randomized property checks ----------------------------------------------


def random_tiny_state(rng, n_customers=None, n_techs=None, first_id=1):
    """A small random state plus scripted arrivals for the next period."""
    t = int(rng.integers(1, 5))
    n = int(rng.integers(1, 4)) if n_customers is None else n_customers
    k = int(rng.integers(1, 3)) if n_techs is None else n_techs
    customers = [
        Customer(first_id + m, float(rng.uniform(60, 140)), float(rng.uniform(60, 140)),
                 Task.ADVANCED if rng.random() < 0.5 else Task.EASY, t,
                 t + int(rng.integers(-2, 3)))
        for m in range(n)
    ]
    techs = tuple(Technician(m + 1, Skill.EXPERT if rng.random() < 0.5 else Skill.REGULAR)
                  for m in range(k))
    state = DecisionState(
        period=t, available_technicians=techs, customers=tuple(customers),
        work_limit=float(rng.uniform(90, 240)),
    )
    arrivals = {}
    if n < MAX_CUSTOMERS and rng.random() < 0.5:
        cid = first_id + n
        arrivals[t + 1] = (Customer(cid, float(rng.uniform(60, 140)), float(rng.uniform(60, 140)),
                                    Task.EASY, t + 1, t + 1 + int(rng.integers(0, 3))),)
    return state, arrivals


def check_deadline_monotonicity(rng, trials=200, horizon=2) -> int:
    """Violations of 'postponing one deadline never raises the optimal value'."""
    bad = 0
    for _ in range(trials):
        state, arrivals = random_tiny_state(rng)
        v = brute_force_value(state, horizon, arrivals)
        pick = int(rng.integers(len(state.customers)))
        relaxed = list(state.customers)
        relaxed[pick] = dataclasses.replace(relaxed[pick], deadline=relaxed[pick].deadline + 1)
        v2 = brute_force_value(dataclasses.replace(state, customers=tuple(relaxed)), horizon, arrivals)
        if v2 > v + 1e-12:
            bad += 1
    return bad


def twin_state(rng):
    """Two co-located customers of equal task, earlier deadline on the lower id, room for one."""
    t = int(rng.integers(1, 5))
    x, y = float(rng.uniform(40, 160)), float(rng.uniform(40, 160))
    task = Task.ADVANCED if rng.random() < 0.5 else Task.EASY
    d_i = t + int(rng.integers(-2, 2))
    d_j = d_i + int(rng.integers(1, 3))
    ci = Customer(1, x, y, task, t, d_i)
    cj = Customer(2, x, y, task, t, d_j)
    tech = Technician(1, Skill.EXPERT if rng.random() < 0.5 else Skill.REGULAR)
    one = route_duration([1], TravelModel.from_customers([ci, cj]))
    # a second co-located visit adds exactly one service time
    limit = one + float(rng.uniform(0.0, 0.9)) * 30.0
    state = DecisionState(period=t, available_technicians=(tech,), customers=(ci, cj),
                          work_limit=limit)
    return state, tech


def check_twin_preference(rng, trials=100, horizon=2) -> int:
    """Violations of 'serving the earlier-deadline twin is never worse'."""
    bad = 0
    for _ in range(trials):
        state, tech = twin_state(rng)
        vi = assignment_value(state, {tech.id: [1]}, horizon)
        vj = assignment_value(state, {tech.id: [2]}, horizon)
        if vi > vj + 1e-12:
            bad += 1
    return bad


def selftest(seed: int = 0, monotonicity_trials: int = 200, twin_trials: int = 100) -> dict:
    rng = np.random.default_rng(seed)
    return {
        "deadline_monotonicity_violations": check_deadline_monotonicity(rng, monotonicity_trials),
        "twin_preference_violations": check_twin_preference(rng, twin_trials),
    }
