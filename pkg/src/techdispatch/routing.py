"""Travel times, route durations, feasibility checks and cheapest insertion.

Node 0 is the depot.  Travel times are in minutes and include the service
time at the head node of the arc (none at the depot).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .domain import Customer, Decision, DecisionState
from .errors import StructuralError

DEPOT = 0
# slack for comparing recomputed durations against the work limit
DURATION_TOL = 1e-6
TIE_TOL = 1e-9  # insertion positions this close count as tied (earliest wins)


@dataclass(frozen=True)
class TravelModel:
    locations: Mapping[int, tuple[float, float]]
    speed_kmh: float = 60.0
    service_minutes: float = 30.0

    @classmethod
    def from_customers(
        cls,
        customers: Iterable[Customer],
        speed_kmh: float = 60.0,
        service_minutes: float = 30.0,
        depot: tuple[float, float] = (100.0, 100.0),
    ) -> "TravelModel":
        locs = {DEPOT: (float(depot[0]), float(depot[1]))}
        for c in customers:
            locs[c.id] = (c.x, c.y)
        return cls(locs, speed_kmh, service_minutes)

    def distance(self, i: int, j: int) -> float:
        try:
            xi, yi = self.locations[i]
            xj, yj = self.locations[j]
        except KeyError as exc:
            raise KeyError(f"unknown node {exc.args[0]}") from None
        dx, dy = xi - xj, yi - yj
        return math.sqrt(dx * dx + dy * dy)

    def travel_time(self, i: int, j: int) -> float:
        minutes = self.distance(i, j) / self.speed_kmh * 60.0
        if j != DEPOT:
            minutes += self.service_minutes
        return minutes


@dataclass(frozen=True)
class RouteEvaluation:
    duration_minutes: float
    feasible: bool
    violated: str | None = None


def travel_time(i: int, j: int, model: TravelModel) -> float:
    return model.travel_time(i, j)


def route_duration(route: Sequence[int], model: TravelModel) -> float:
    if len(set(route)) != len(route):
        raise StructuralError(f"route visits a customer twice: {list(route)}")
    if DEPOT in route:
        raise StructuralError("the depot cannot appear inside a route")
    if not route:
        return 0.0
    total = 0.0
    prev = DEPOT
    for node in route:
        total += model.travel_time(prev, node)
        prev = node
    return total + model.travel_time(prev, DEPOT)


def validate_decision(state: DecisionState, decision: Decision) -> dict[int, RouteEvaluation]:
    """Check every route; never raises on infeasible input.

    Tags: ``duplicate-customer`` (visited at most once), ``unknown-customer``,
    ``unavailable-technician``, ``work-limit``.  Depot start/end, flow
    conservation and subtour elimination hold by the sequence encoding.
    """
    seen: set[int] = set()
    result = {}
    model = state.travel
    known = state.customer_by_id
    for w in sorted(decision.routes):
        route = decision.routes[w]
        violated = None
        if w not in state.technician_by_id and route:
            violated = "unavailable-technician"
        elif len(set(route)) != len(route) or seen.intersection(route):
            violated = "duplicate-customer"
        elif any(i not in known for i in route):
            violated = "unknown-customer"
        seen.update(route)
        if violated in (None, "unavailable-technician"):
            duration = route_duration(route, model)
        else:
            duration = float("nan")
        if violated is None and duration > state.work_limit + DURATION_TOL:
            violated = "work-limit"
        result[w] = RouteEvaluation(duration, violated is None, violated)
    return result


def is_feasible(state: DecisionState, decision: Decision) -> bool:
    return all(ev.feasible for ev in validate_decision(state, decision).values())


def insertion_deltas(route: Sequence[int], customer: int, model: TravelModel) -> list[float]:
    """Duration increase for every insertion position 0..len(route)."""
    nodes = [DEPOT, *route, DEPOT]
    out = []
    for pos in range(len(route) + 1):
        a, b = nodes[pos], nodes[pos + 1]
        if a == DEPOT and b == DEPOT:
            out.append(model.travel_time(DEPOT, customer) + model.travel_time(customer, DEPOT))
        else:
            out.append(
                model.travel_time(a, customer)
                + model.travel_time(customer, b)
                - model.travel_time(a, b)
            )
    return out


def cheapest_insertion(
    decision: Decision, tech_id: int, customer: int, model: TravelModel
) -> tuple[Decision, float]:
    """Insert ``customer`` where ``tech_id``'s route grows least (earliest on ties).

    The work limit is not checked here.
    """
    if customer in decision.technician_of():
        raise StructuralError(f"customer {customer} is already routed")
    route = decision.routes.get(tech_id, ())
    deltas = insertion_deltas(route, customer, model)
    pos = 0
    for k in range(1, len(deltas)):
        if deltas[k] < deltas[pos] - TIE_TOL:
            pos = k
    new_route = (*route[:pos], customer, *route[pos:])
    return decision.with_route(tech_id, new_route), max(deltas[pos], 0.0)
