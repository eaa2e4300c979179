import json
import math
import random

import numpy as np
import pytest

from techdispatch.cli import main
from techdispatch.domain import DecisionState
from techdispatch.errors import ConfigurationError, OracleSizeError
from techdispatch.experiments.analysis import feature_impact_table, impact_table
from techdispatch.experiments.metrics import (
    WORKDAY_MINUTES,
    evaluate,
    summarize,
    technician_days,
)
from techdispatch.experiments.oracle import (
    assignment_value,
    brute_force_value,
    check_deadline_monotonicity,
    check_twin_preference,
)
from techdispatch.experiments.report import emit_report, summary_dict
from techdispatch.instances import InstanceConfig, generate_instance, write_set
from techdispatch.policies import Benchmark, StaticBalance
from techdispatch.rl.features import N_FEATURES
from techdispatch.rl.model import PolicyModel
from techdispatch.routing import TravelModel, route_duration
from techdispatch.simulation import run_episode

from conftest import cust, tech


# -- metrics ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def ef_report():
    insts = [generate_instance(InstanceConfig(seed=700 + k)) for k in range(4)]
    return evaluate(Benchmark.EF, insts, record_routes=True), insts


def test_metric_invariants(ef_report):
    report, _ = ef_report
    assert sum(report.revisit_shares) == pytest.approx(1.0)
    assert sum(report.completion_delta.values()) == pytest.approx(1.0)
    for row in report.per_instance:
        assert row["delay"] <= row["inconvenience"] + 1e-12
        assert (row["delay"] == 0) == (row["inconvenience"] == 0)
    assert report.revisit_shares[1] + report.revisit_shares[2] > 0


def test_technician_days_double_entry(ef_report):
    report, insts = ef_report
    for r, inst in zip(report.results, insts):
        cfg = inst.config
        travel = TravelModel.from_customers(inst.customers, cfg.speed_kmh, cfg.service_minutes,
                                            cfg.depot)
        minutes = sum(route_duration(route, travel)
                      for _, dec in r.routes for route in dec.routes.values())
        assert technician_days(r) == pytest.approx(minutes / WORKDAY_MINUTES, rel=1e-12)


def test_aggregates_are_order_invariant(ef_report):
    report, _ = ef_report
    shuffled = list(report.results)
    random.Random(1).shuffle(shuffled)
    again = summarize(report.policy, shuffled)
    assert summary_dict(again) == summary_dict(report)


@pytest.mark.parametrize("policy", [Benchmark.MYSF, Benchmark.MYEX, Benchmark.SF, Benchmark.EX])
def test_safe_policies_never_revisit(policy, small_instances):
    report = evaluate(policy, small_instances[:2])
    assert report.revisit_shares == (1.0, 0.0, 0.0)
    assert report.returning_visits.mean == 0


def test_ef_inconvenience_grows_with_depot_distance(ef_report):
    report, _ = ef_report
    dist, inc = [], []
    for r in report.results:
        for c in r.customers:
            dist.append(math.hypot(c.x - 100, c.y - 100))
            inc.append(c.inconvenience)
    assert np.corrcoef(dist, inc)[0, 1] > 0


def test_empty_set_is_an_error(tmp_path):
    with pytest.raises(ConfigurationError):
        evaluate(Benchmark.EF, tmp_path)
    with pytest.raises(ConfigurationError):
        evaluate(Benchmark.EF, [])


def test_unreadable_file_is_listed(tmp_path):
    write_set(InstanceConfig(arrival_days=3), 2, 10, tmp_path)
    (tmp_path / "instance_99999.json").write_text("{broken")
    report = evaluate(Benchmark.MYSF, tmp_path)
    assert report.n_instances == 2
    assert [f for f, _ in report.failures] == ["instance_99999.json"]


# -- oracle -------------------------------------------------------------------------


def test_oracle_single_customer_is_free():
    s = DecisionState(period=3, available_technicians=(tech(1, False),),
                      customers=(cust(1, 120, 100, deadline=3),))
    assert brute_force_value(s, 1) == 0


def test_oracle_risky_example():
    # one advanced customer due now, one regular technician, p = 0.5, eta = 1.1
    # next period: serve (0.5 * 1.21) beats waiting (1.21) -> 0.605
    # now: serve 0.5 * (1.1 + 0.605) = 0.8525, wait 1.1 + 0.605
    s = DecisionState(period=3, available_technicians=(tech(1, False),),
                      customers=(cust(1, 120, 100, "advanced", 1, 3),))
    assert brute_force_value(s, 2) == pytest.approx(0.8525, abs=1e-12)
    assert assignment_value(s, {1: []}, 2) == pytest.approx(1.705, abs=1e-12)


def test_oracle_without_technicians_sums_penalties():
    s = DecisionState(period=5, available_technicians=(),
                      customers=(cust(1, 0, 0, deadline=4), cust(2, 0, 0, deadline=6)))
    assert brute_force_value(s, 3) == pytest.approx(1.21 + 1.331 + 1.4641 + 1.1 + 1.21, abs=1e-12)


def test_oracle_refuses_large_states():
    s = DecisionState(period=1, available_technicians=(tech(1, True),),
                      customers=tuple(cust(i, 100, 100) for i in range(1, 7)))
    with pytest.raises(OracleSizeError, match="6"):
        brute_force_value(s, 1)
    with pytest.raises(OracleSizeError):
        brute_force_value(s.__class__(period=1, available_technicians=(), customers=()), 4)


def test_deadline_monotonicity():
    assert check_deadline_monotonicity(np.random.default_rng(11), 200) == 0


def test_earlier_twin_first():
    assert check_twin_preference(np.random.default_rng(12), 100) == 0


# -- analysis ---------------------------------------------------------------------------


def test_constant_model_has_no_impact(small_instances):
    model = PolicyModel.create(rng=None)
    rows = feature_impact_table(model, small_instances[:1])
    assert len(rows) == N_FEATURES + 1 and rows[-1].feature == "n_available"
    assert all(r.below_pct == 0 and r.above_pct == 0 for r in rows)


def test_impact_table_example(caplog):
    feats = np.zeros((4, N_FEATURES))
    feats[:, 0] = [1, 2, 3, 4]
    alphas = np.array([0.2, 0.2, 0.4, 0.4])
    rows = impact_table(feats, alphas)
    assert rows[0].below_pct == pytest.approx(-100 / 3)
    assert rows[0].above_pct == pytest.approx(100 / 3)
    assert "noisy" in caplog.text


# -- report ---------------------------------------------------------------------------


def test_report_files_are_reproducible(tmp_path, small_instances):
    outs = []
    for k in range(2):
        report = evaluate(StaticBalance(0.33), small_instances[:2], record_routes=True)
        emit_report(report, tmp_path / str(k), {"policy": "sb:0.33"})
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / str(k)).iterdir())})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"per_instance.csv", "summary.json", "spatial_grid.csv",
                            "cumulative.csv", "routes.txt"}
    rows = outs[0]["per_instance.csv"].decode().splitlines()
    assert rows[0].startswith("# policy=sb:0.33 config_hash=")
    assert len(rows) == 2 + 2
    summary = json.loads(outs[0]["summary.json"])
    assert summary["inconvenience"]["mean"] == report.inconvenience.mean
    assert summary["delay"]["mean"] == report.delay.mean
    assert summary["seeds"] == [500, 501]


def test_unwritable_directory(tmp_path, small_instances):
    report = evaluate(Benchmark.MYSF, small_instances[:1])
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_report(report, blocker / "sub")


# -- command line ---------------------------------------------------------------------


def test_cli_round_trip(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"arrival_days": 4}))
    assert main(["generate", "--config", str(cfg), "--count", "2", "--seed", "42",
                 "--out", str(tmp_path / "inst")]) == 0
    assert main(["run", "--policy", "sb:0.33", "--instances", str(tmp_path / "inst"),
                 "--out", str(tmp_path / "out"), "--routes", "1"]) == 0
    assert (tmp_path / "out" / "summary.json").exists()
    assert main(["gridsearch", "--instances", str(tmp_path / "inst"), "--grid", "0.2,0.4"]) == 0
    assert "best alpha" in capsys.readouterr().out
    assert main(["run", "--policy", "nonsense", "--instances", str(tmp_path / "inst"),
                 "--out", str(tmp_path / "o2")]) == 1
    (tmp_path / "inst" / "instance_99999.json").write_text("[]")
    assert main(["run", "--policy", "mysf", "--instances", str(tmp_path / "inst"),
                 "--out", str(tmp_path / "o3")]) == 1


def test_cli_oracle_selftest(capsys):
    assert main(["oracle", "--selftest"]) == 0
    assert "violations: 0" in capsys.readouterr().out
