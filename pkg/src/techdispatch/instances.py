"""Pre-drawn problem realizations shared by every policy (common random numbers).

Each source of randomness has its own child stream of ``config.seed``, so
drawing more or fewer numbers from one stream never shifts another.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import Customer, Skill, Task, Technician
from .errors import ConfigurationError, InstanceFormatError, VersionError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
REWORK_DRAWS = 8
ABSENCE_HORIZON_FACTOR = 4

_STREAMS = {"arrivals": 0, "locations": 1, "tasks": 2, "absences": 3, "rework": 4}


def stream(seed: int, name: str, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_STREAMS[name], *key)))


@dataclass(frozen=True)
class InstanceConfig:
    area_side_km: float = 200.0
    num_regular: int = 3
    num_expert: int = 3
    absence_prob: float = 0.1
    work_limit_minutes: float = 420.0
    service_minutes: float = 30.0
    speed_kmh: float = 60.0
    weekly_demand_mean: float = 180.0
    cv: float = 1.0 / 6.0
    monday_multiplier: float = 3.0
    deadline_offset_days: int = 2
    eta: float = 1.1
    rework_prob: float = 0.5
    arrival_days: int = 15
    easy_share: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("absence_prob", "rework_prob", "easy_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must be a probability, got {v}")
        for name in ("num_regular", "num_expert", "arrival_days", "deadline_offset_days"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.eta <= 1.0:
            raise ConfigurationError(f"eta must exceed 1, got {self.eta}")
        if self.speed_kmh <= 0 or self.work_limit_minutes <= 0:
            raise ConfigurationError("speed and work limit must be positive")

    @property
    def daily_mean(self) -> float:
        return self.weekly_demand_mean / 7.0

    @property
    def cutoff_period(self) -> int:
        return self.arrival_days + 1

    @property
    def depot(self) -> tuple[float, float]:
        return (self.area_side_km / 2.0, self.area_side_km / 2.0)

    def technicians(self) -> tuple[Technician, ...]:
        # experts take the low ids, so id-based tie-breaks favour safe pairings
        exps = [Technician(k + 1, Skill.EXPERT) for k in range(self.num_expert)]
        regs = [Technician(self.num_expert + k + 1, Skill.REGULAR) for k in range(self.num_regular)]
        return tuple(exps + regs)

    def replace(self, **changes) -> "InstanceConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> "InstanceConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            log.warning("ignoring unknown config fields: %s", ", ".join(unknown))
        return cls(**{k: v for k, v in data.items() if k in known})


def is_monday(day: int) -> bool:
    return day % 5 == 1


def daily_arrival_count(day: int, config: InstanceConfig, rng: np.random.Generator) -> int:
    if not 1 <= day <= config.arrival_days:
        raise ConfigurationError(f"day {day} outside the arrival window")
    mu = config.daily_mean
    draw = rng.normal(mu, config.cv * mu)
    if is_monday(day):
        draw *= config.monday_multiplier
    return max(0, int(round(draw)))


@dataclass(frozen=True, eq=False)
class InstanceRealization:
    config: InstanceConfig
    arrivals: dict[int, tuple[Customer, ...]]
    absences: np.ndarray  # bool, [technician index x period index], period p at column p - 1
    rework_streams: dict[int, tuple[float, ...]]
    _absence_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __eq__(self, other):
        if not isinstance(other, InstanceRealization):
            return NotImplemented
        return (
            self.config == other.config
            and self.arrivals == other.arrivals
            and np.array_equal(self.absences, other.absences)
            and self.rework_streams == other.rework_streams
        )

    @property
    def technicians(self) -> tuple[Technician, ...]:
        return self.config.technicians()

    @property
    def customers(self) -> list[Customer]:
        return [c for day in sorted(self.arrivals) for c in self.arrivals[day]]

    def arrivals_in(self, period: int) -> tuple[Customer, ...]:
        return self.arrivals.get(period, ())

    def absent(self, tech_index: int, period: int) -> bool:
        horizon = self.absences.shape[1]
        if period <= horizon:
            return bool(self.absences[tech_index, period - 1])
        block = (period - 1) // horizon
        if block not in self._absence_cache:
            rng = stream(self.config.seed, "absences", block)
            self._absence_cache[block] = (
                rng.random((self.absences.shape[0], horizon)) < self.config.absence_prob
            )
        return bool(self._absence_cache[block][tech_index, (period - 1) % horizon])

    def available(self, period: int) -> tuple[Technician, ...]:
        return tuple(w for k, w in enumerate(self.technicians) if not self.absent(k, period))

    def rework_uniform(self, customer_id: int, k: int) -> float:
        """Uniform deciding the k-th risky visit (0-based) of a customer."""
        draws = self.rework_streams[customer_id]
        if k < len(draws):
            return draws[k]
        rng = stream(self.config.seed, "rework", customer_id)
        return float(rng.random(k + 1 - len(draws))[-1])


def generate_instance(config: InstanceConfig) -> InstanceRealization:
    seed = config.seed
    rng_arr = stream(seed, "arrivals")
    rng_loc = stream(seed, "locations")
    rng_task = stream(seed, "tasks")
    side = config.area_side_km
    arrivals = {}
    next_id = 1
    for day in range(1, config.arrival_days + 1):
        count = daily_arrival_count(day, config, rng_arr)
        xy = rng_loc.random((count, 2)) * side
        easy = rng_task.random(count) < config.easy_share
        batch = []
        for k in range(count):
            cid = next_id
            next_id += 1
            batch.append(
                Customer(
                    id=cid,
                    x=float(xy[k, 0]),
                    y=float(xy[k, 1]),
                    task=Task.EASY if easy[k] else Task.ADVANCED,
                    arrival_period=day,
                    deadline=day + config.deadline_offset_days,
                )
            )
        arrivals[day] = tuple(batch)
    # one block for the stored draws; per-customer child streams only cover
    # the rare visits beyond REWORK_DRAWS
    block = stream(seed, "rework").random((next_id - 1, REWORK_DRAWS))
    rework = {cid: tuple(block[cid - 1].tolist()) for cid in range(1, next_id)}
    n_tech = config.num_regular + config.num_expert
    horizon = ABSENCE_HORIZON_FACTOR * max(config.arrival_days, 1)
    absences = stream(seed, "absences", 0).random((n_tech, horizon)) < config.absence_prob
    return InstanceRealization(config, arrivals, absences, rework)


# -- persistence -------------------------------------------------------------


def _customer_row(c: Customer) -> list:
    return [c.id, c.x, c.y, c.task.value, c.arrival_period, c.deadline]


def instance_to_dict(inst: InstanceRealization) -> dict:
    return {
        "format": "techdispatch-instance",
        "version": FORMAT_VERSION,
        "config": dataclasses.asdict(inst.config),
        "customers": [_customer_row(c) for c in inst.customers],
        "absences": ["".join("1" if a else "0" for a in row) for row in inst.absences],
        "rework": {str(cid): list(u) for cid, u in sorted(inst.rework_streams.items())},
    }


def dumps_instance(inst: InstanceRealization) -> str:
    return json.dumps(instance_to_dict(inst), indent=1, sort_keys=True) + "\n"


def save_instance(inst: InstanceRealization, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def _fail(msg: str, path) -> InstanceFormatError:
    return InstanceFormatError(f"{path}: {msg}")


def loads_instance(text: str, path="<string>") -> InstanceRealization:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _fail(f"line {exc.lineno} column {exc.colno}: {exc.msg}", path) from None
    if not isinstance(data, dict):
        raise _fail("top level must be an object", path)
    if data.get("version") != FORMAT_VERSION:
        raise VersionError(f"{path}: instance format version {data.get('version')!r}, "
                           f"expected {FORMAT_VERSION}")
    extra = sorted(set(data) - {"format", "version", "config", "customers", "absences", "rework"})
    if extra:
        log.warning("%s: ignoring unknown fields %s", path, ", ".join(extra))
    for key in ("config", "customers", "absences", "rework"):
        if key not in data:
            raise _fail(f"missing field {key!r}", path)
    try:
        config = InstanceConfig.from_dict(data["config"])
    except (TypeError, ConfigurationError) as exc:
        raise _fail(f"field 'config': {exc}", path) from None
    arrivals: dict[int, list[Customer]] = {d: [] for d in range(1, config.arrival_days + 1)}
    for k, row in enumerate(data["customers"]):
        try:
            cid, x, y, task, arrival, deadline = row
            c = Customer(int(cid), float(x), float(y), Task(task), int(arrival), int(deadline))
        except (TypeError, ValueError) as exc:
            raise _fail(f"field 'customers[{k}]': {exc}", path) from None
        arrivals.setdefault(c.arrival_period, []).append(c)
    try:
        absences = np.array([[ch == "1" for ch in row] for row in data["absences"]], dtype=bool)
        if absences.ndim != 2 or any(set(row) - {"0", "1"} for row in data["absences"]):
            raise ValueError("rows must be equal-length 0/1 strings")
    except (TypeError, ValueError) as exc:
        raise _fail(f"field 'absences': {exc}", path) from None
    if absences.shape[0] != config.num_regular + config.num_expert:
        raise _fail("field 'absences': row count does not match the fleet", path)
    try:
        rework = {int(cid): tuple(float(u) for u in us) for cid, us in data["rework"].items()}
    except (TypeError, ValueError, AttributeError) as exc:
        raise _fail(f"field 'rework': {exc}", path) from None
    missing = [c.id for cs in arrivals.values() for c in cs if c.id not in rework]
    if missing:
        raise _fail(f"field 'rework': no stream for customers {missing[:5]}", path)
    for u in (u for us in rework.values() for u in us):
        if not (0.0 <= u < 1.0) or math.isnan(u):
            raise _fail(f"field 'rework': value {u} outside [0, 1)", path)
    return InstanceRealization(
        config, {d: tuple(cs) for d, cs in sorted(arrivals.items())}, absences, rework
    )


def load_instance(path) -> InstanceRealization:
    path = Path(path)
    return loads_instance(path.read_text(), path)


def generate_set(config: InstanceConfig, count: int, base_seed: int) -> list[InstanceRealization]:
    return [generate_instance(config.replace(seed=base_seed + k)) for k in range(count)]


def write_set(config: InstanceConfig, count: int, base_seed: int, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(count):
        inst = generate_instance(config.replace(seed=base_seed + k))
        p = out / f"instance_{k:04d}.json"
        save_instance(inst, p)
        paths.append(p)
    manifest = {
        "version": FORMAT_VERSION,
        "count": count,
        "base_seed": base_seed,
        "config": dataclasses.asdict(config.replace(seed=base_seed)),
        "files": [p.name for p in paths],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return paths


def load_set(in_dir) -> list[InstanceRealization]:
    return [load_instance(p) for p in sorted(Path(in_dir).glob("instance_*.json"))]
