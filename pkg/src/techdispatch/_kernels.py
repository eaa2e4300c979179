"""Compiled inner loops for the assignment engines.

Customers are addressed by index (state order, i.e. ascending id) and
technicians by index (ascending id).  Durations are minutes.
"""

import math

import numpy as np
from numba import njit

FEAS_TOL = 1e-9
# insertion positions closer than this count as tied; the earliest one wins
TIE_TOL = 1e-9


@njit(cache=True)
def _travel_matrix(cx, cy, depot_x, depot_y, speed):
    """Pure driving minutes; row/col 0 is the depot, customer k is k + 1."""
    n = cx.shape[0]
    xs = np.empty(n + 1)
    ys = np.empty(n + 1)
    xs[0] = depot_x
    ys[0] = depot_y
    xs[1:] = cx
    ys[1:] = cy
    tt = np.empty((n + 1, n + 1))
    for a in range(n + 1):
        for b in range(n + 1):
            dx = xs[a] - xs[b]
            dy = ys[a] - ys[b]
            tt[a, b] = math.sqrt(dx * dx + dy * dy) / speed * 60.0
    return tt


@njit(cache=True)
def _best_position(route, length, node, tt, service):
    """Cheapest insertion of ``node`` (matrix index) into ``route[:length]``."""
    if length == 0:
        return tt[0, node] + service + tt[node, 0], 0
    best = np.inf
    best_pos = 0
    for pos in range(length + 1):
        a = 0 if pos == 0 else route[pos - 1]
        b = 0 if pos == length else route[pos]
        b_service = 0.0 if b == 0 else service
        d = (tt[a, node] + service) + (tt[node, b] + b_service) - (tt[a, b] + b_service)
        if d < best - TIE_TOL:
            best = d
            best_pos = pos
    return best, best_pos


@njit(cache=True)
def _duration(route, length, tt, service):
    if length == 0:
        return 0.0
    total = 0.0
    prev = 0
    for k in range(length):
        total += tt[prev, route[k]] + service
        prev = route[k]
    return total + tt[prev, 0]


@njit(cache=True)
def _insert(route, length, pos, node):
    for k in range(length, pos, -1):
        route[k] = route[k - 1]
    route[pos] = node


@njit(cache=True)
def greedy_assign(
    cx, cy, deadline, advanced, expert, allowed,
    t, eta, p, alpha, risk_aware, unit,
    depot_x, depot_y, speed, service, limit,
):
    """Iteratively commit the feasible (customer, technician) pair of highest score.

    Returns (routes, lengths, durations); ``routes`` holds customer indices.
    Ties keep the lowest customer index, then the lowest technician index.
    """
    n = cx.shape[0]
    m = expert.shape[0]
    tt = _travel_matrix(cx, cy, depot_x, depot_y, speed)
    routes = np.full((m, n + 1), -1, np.int64)
    nodes = np.zeros((m, n + 1), np.int64)
    lengths = np.zeros(m, np.int64)
    durations = np.zeros(m)
    routed = np.zeros(n, np.bool_)
    delta = np.empty((m, n))
    pos = np.zeros((m, n), np.int64)
    urg_safe = np.empty(n)
    for i in range(n):
        urg_safe[i] = eta ** float(t - deadline[i] + 1)
    for w in range(m):
        for i in range(n):
            delta[w, i], pos[w, i] = _best_position(nodes[w], 0, i + 1, tt, service)

    for _ in range(n):
        best = -np.inf
        bi = -1
        bw = -1
        for i in range(n):
            if routed[i]:
                continue
            for w in range(m):
                if not allowed[w, i]:
                    continue
                if durations[w] + delta[w, i] > limit + FEAS_TOL:
                    continue
                rho = p if (advanced[i] and not expert[w]) else 0.0
                eff = delta[w, i] / unit
                if risk_aware:
                    eff = eff / (1.0 - rho)
                s = (1.0 - alpha) * ((1.0 - rho) * urg_safe[i]) - alpha * eff
                if s > best:
                    best = s
                    bi = i
                    bw = w
        if bi < 0:
            break
        _insert(nodes[bw], lengths[bw], pos[bw, bi], bi + 1)
        lengths[bw] += 1
        routed[bi] = True
        durations[bw] = _duration(nodes[bw], lengths[bw], tt, service)
        for i in range(n):
            if not routed[i] and allowed[bw, i]:
                delta[bw, i], pos[bw, i] = _best_position(
                    nodes[bw], lengths[bw], i + 1, tt, service
                )

    for w in range(m):
        for k in range(lengths[w]):
            routes[w, k] = nodes[w, k] - 1
    return routes, lengths, durations


@njit(cache=True)
def deadline_greedy_assign(
    cx, cy, deadline, allowed, expert, depot_x, depot_y, speed, service, limit,
):
    """Iteratively commit the feasible pair minimizing (deadline, insertion time).

    Among customers sharing the earliest deadline the cheapest insertion wins;
    remaining ties keep the lowest customer index, then technician index.
    """
    n = cx.shape[0]
    m = expert.shape[0]
    tt = _travel_matrix(cx, cy, depot_x, depot_y, speed)
    routes = np.full((m, n + 1), -1, np.int64)
    nodes = np.zeros((m, n + 1), np.int64)
    lengths = np.zeros(m, np.int64)
    durations = np.zeros(m)
    routed = np.zeros(n, np.bool_)
    delta = np.empty((m, n))
    pos = np.zeros((m, n), np.int64)
    for w in range(m):
        for i in range(n):
            delta[w, i], pos[w, i] = _best_position(nodes[w], 0, i + 1, tt, service)

    for _ in range(n):
        best_deadline = np.iinfo(np.int64).max
        best = np.inf
        bi = -1
        bw = -1
        for i in range(n):
            if routed[i] or deadline[i] > best_deadline:
                continue
            for w in range(m):
                if not allowed[w, i]:
                    continue
                if durations[w] + delta[w, i] > limit + FEAS_TOL:
                    continue
                if deadline[i] < best_deadline or delta[w, i] < best:
                    best_deadline = deadline[i]
                    best = delta[w, i]
                    bi = i
                    bw = w
        if bi < 0:
            break
        _insert(nodes[bw], lengths[bw], pos[bw, bi], bi + 1)
        lengths[bw] += 1
        routed[bi] = True
        durations[bw] = _duration(nodes[bw], lengths[bw], tt, service)
        for i in range(n):
            if not routed[i] and allowed[bw, i]:
                delta[bw, i], pos[bw, i] = _best_position(
                    nodes[bw], lengths[bw], i + 1, tt, service
                )

    for w in range(m):
        for k in range(lengths[w]):
            routes[w, k] = nodes[w, k] - 1
    return routes, lengths, durations
