"""Aggregate performance measures over batches of episodes."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, TechDispatchError
from ..instances import InstanceRealization, load_instance
from ..policies import PolicyKind, policy_name
from ..simulation import EpisodeResult, run_episode

log = logging.getLogger(__name__)

WORKDAY_MINUTES = 420.0
GRID_CELLS = 20


def inconvenience_per_customer(result) -> float:
    n = len(result.customers)
    return result.total_inconvenience / n if n else 0.0


def mean_inconvenience(results) -> float:
    return float(np.mean([inconvenience_per_customer(r) for r in results]))


def mean_delay(result: EpisodeResult) -> float:
    n = len(result.customers)
    return sum(c.delay for c in result.customers) / n if n else 0.0


def returning_visits(result: EpisodeResult) -> int:
    return sum(max(0, c.visits - 1) for c in result.customers)


def technician_days(result: EpisodeResult, workday: float = WORKDAY_MINUTES) -> float:
    return sum(sum(p.minutes) for p in result.periods) / workday


def revisit_counts(result: EpisodeResult) -> Counter:
    """Advanced customers by number of revisits, bucketed 0 / 1 / 2 (meaning 2+)."""
    return Counter(min(2, max(0, c.visits - 1)) for c in result.customers if c.task == "advanced")


def cumulative_inconvenience(result: EpisodeResult) -> np.ndarray:
    return np.cumsum([p.realized_cost for p in result.periods])


def _se(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0


@dataclass(frozen=True)
class Stat:
    mean: float
    se: float

    @classmethod
    def of(cls, values) -> "Stat":
        return cls(float(np.mean(values)), _se(values))


@dataclass
class MetricsReport:
    policy: str
    n_instances: int
    inconvenience: Stat
    delay: Stat
    leftover_days: Stat
    technician_days: Stat
    returning_visits: Stat
    revisit_shares: tuple[float, float, float]  # advanced customers revisited 0 / 1 / 2+ times
    on_time_share: float
    completion_delta: dict[int, float]  # completion - deadline -> share of customers
    cumulative: list[float]  # mean cumulative inconvenience by period index
    spatial_grid: list[list[float | None]]  # [row = y cell][col = x cell]
    per_instance: list[dict]
    divergent: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)
    results: list[EpisodeResult] = field(default_factory=list, repr=False)


def spatial_grid(results, side: float, cells: int = GRID_CELLS) -> list[list[float | None]]:
    """Mean inconvenience of customers located in each square cell (None if empty)."""
    total = np.zeros((cells, cells))
    count = np.zeros((cells, cells))
    for r in results:
        for c in r.customers:
            i = min(cells - 1, max(0, int(c.y / side * cells)))
            j = min(cells - 1, max(0, int(c.x / side * cells)))
            total[i, j] += c.inconvenience
            count[i, j] += 1
    return [[float(total[i, j] / count[i, j]) if count[i, j] else None for j in range(cells)]
            for i in range(cells)]


def summarize(policy: str, results: list[EpisodeResult], side: float = 200.0,
              cells: int = GRID_CELLS, failures=()) -> MetricsReport:
    if not results:
        raise ConfigurationError("no episodes to summarize")
    results = sorted(results, key=lambda r: r.seed)
    rows = []
    for r in results:
        rows.append({
            "seed": r.seed,
            "customers": len(r.customers),
            "inconvenience": inconvenience_per_customer(r),
            "delay": mean_delay(r),
            "leftover_days": r.leftover_days,
            "technician_days": technician_days(r),
            "returning_visits": returning_visits(r),
            "final_period": r.final_period,
            "divergent": r.divergent,
        })
    rev = Counter()
    deltas = Counter()
    for r in results:
        rev.update(revisit_counts(r))
        deltas.update((c.completion - c.deadline) for c in r.customers if c.completion is not None)
    n_adv = sum(rev.values())
    shares = tuple(rev[k] / n_adv if n_adv else (1.0 if k == 0 else 0.0) for k in range(3))
    n_done = sum(deltas.values())
    on_time = sum(v for d, v in deltas.items() if d <= 0) / n_done if n_done else 1.0
    horizon = max(len(r.periods) for r in results)
    cum = np.zeros(horizon)
    for r in results:
        c = cumulative_inconvenience(r)
        if c.size:
            cum += np.concatenate([c, np.full(horizon - c.size, c[-1])])
    return MetricsReport(
        policy=policy,
        n_instances=len(results),
        inconvenience=Stat.of([row["inconvenience"] for row in rows]),
        delay=Stat.of([row["delay"] for row in rows]),
        leftover_days=Stat.of([row["leftover_days"] for row in rows]),
        technician_days=Stat.of([row["technician_days"] for row in rows]),
        returning_visits=Stat.of([row["returning_visits"] for row in rows]),
        revisit_shares=shares,
        on_time_share=on_time,
        completion_delta={d: deltas[d] / n_done for d in sorted(deltas)} if n_done else {},
        cumulative=(cum / len(results)).tolist(),
        spatial_grid=spatial_grid(results, side, cells),
        per_instance=rows,
        divergent=sum(r.divergent for r in results),
        failures=list(failures),
        results=results,
    )


def _load_all(instances):
    """Realizations plus (name, error) pairs for files that could not be read."""
    if isinstance(instances, (str, Path)):
        paths = sorted(Path(instances).glob("instance_*.json"))
        out, failures = [], []
        for p in paths:
            try:
                out.append(load_instance(p))
            except (OSError, TechDispatchError) as exc:
                log.error("skipping %s: %s", p, exc)
                failures.append((p.name, str(exc)))
        return out, failures
    return list(instances), []


def evaluate(policy: PolicyKind, instances, cells: int = GRID_CELLS,
             record_routes: bool = False) -> MetricsReport:
    """Run ``policy`` on every instance (directory or iterable of realizations)."""
    realizations, failures = _load_all(instances)
    if not realizations:
        raise ConfigurationError(
            "no instances to evaluate" + (f" ({len(failures)} unreadable)" if failures else ""))
    results = [run_episode(r, policy, record_routes=record_routes) for r in realizations]
    side = realizations[0].config.area_side_km
    return summarize(policy_name(policy), results, side, cells, failures)
