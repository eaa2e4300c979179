import numpy as np
import pytest
from hypothesis import settings

from techdispatch.domain import Customer, DecisionState, Skill, Task, Technician
from techdispatch.instances import InstanceConfig, generate_instance

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def cust(cid, x, y, task="easy", arrival=1, deadline=3, visits=0):
    return Customer(cid, float(x), float(y), Task(task), arrival, deadline, visits)


def tech(tid, expert):
    return Technician(tid, Skill.EXPERT if expert else Skill.REGULAR)


def random_state(rng, n_customers=None, n_techs=None, period=None, work_limit=None):
    t = int(rng.integers(1, 8)) if period is None else period
    n = int(rng.integers(0, 12)) if n_customers is None else n_customers
    k = int(rng.integers(0, 4)) if n_techs is None else n_techs
    customers = tuple(
        cust(i + 1, rng.uniform(0, 200), rng.uniform(0, 200),
             "advanced" if rng.random() < 0.5 else "easy",
             1, int(rng.integers(max(1, t - 4), t + 3)))
        for i in range(n)
    )
    techs = tuple(tech(w + 1, rng.random() < 0.5) for w in range(k))
    return DecisionState(
        period=t, available_technicians=techs, customers=customers,
        work_limit=float(rng.uniform(150, 420)) if work_limit is None else work_limit,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_instances():
    return [generate_instance(InstanceConfig(seed=500 + k)) for k in range(4)]


# acceptance criteria register a one-line verdict here; printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
