import pytest
from hypothesis import given, strategies as st

from techdispatch.scoring import ScoreContext, routing_efficiency, score, service_urgency


def test_urgency_examples():
    assert service_urgency(0.0, 4, 4, 1.1) == pytest.approx(1.1)
    assert service_urgency(0.5, 4, 4, 1.1) == pytest.approx(0.55)
    assert service_urgency(0.0, 6, 4, 1.1) == pytest.approx(1 / 1.1)


def test_urgency_exponent_guard():
    with pytest.raises(OverflowError):
        service_urgency(0.0, 1, 100, 1.1)


def test_efficiency_examples():
    assert routing_efficiency(30, 0.0) == 30
    assert routing_efficiency(40, 0.5) == pytest.approx(80)
    assert routing_efficiency(0, 0.5) == 0
    with pytest.raises(ZeroDivisionError):
        routing_efficiency(10, 1.0)


def test_score_examples():
    assert score(ScoreContext(0.33), 0.0, 4, 4, 30) == pytest.approx(0.67 * 1.1 - 0.33 * 30)
    assert score(ScoreContext(0.33), 0.0, 4, 4, 30) == pytest.approx(-9.163)
    assert score(ScoreContext(0.0), 0.5, 3, 4, 99) == service_urgency(0.5, 3, 4, 1.1)
    assert score(ScoreContext(1.0), 0.5, 3, 4, 99) == -routing_efficiency(99, 0.5)


def test_alpha_is_clamped():
    assert ScoreContext(1.7).alpha == 1.0
    assert ScoreContext(-0.2).alpha == 0.0


rho_st = st.sampled_from([0.0, 0.5])
tau = st.floats(0, 500)


@given(st.floats(0.01, 1.0), rho_st, st.integers(1, 20), st.integers(1, 20), tau, st.floats(0.1, 100))
def test_score_decreases_in_delta_tau(alpha, rho, d, t, dt, extra):
    ctx = ScoreContext(alpha)
    assert score(ctx, rho, d, t, dt + extra) < score(ctx, rho, d, t, dt)


@given(st.floats(0.0, 0.99), rho_st, st.integers(1, 20), st.integers(1, 20), tau, st.integers(1, 5))
def test_score_increases_with_urgency(alpha, rho, d, t, dt, k):
    ctx = ScoreContext(alpha)
    assert score(ctx, rho, d - k, t, dt) > score(ctx, rho, d, t, dt)


@given(st.floats(0.0, 0.99), st.integers(1, 20), st.integers(1, 5), st.integers(1, 20), tau)
def test_twin_with_earlier_deadline_scores_higher(alpha, di, gap, t, dt):
    ctx = ScoreContext(alpha)
    assert score(ctx, 0.0, di, t, dt) > score(ctx, 0.0, di + gap, t, dt)


@given(st.floats(0.001, 0.999), st.integers(1, 20), st.integers(1, 20), st.floats(0.01, 500))
def test_safe_beats_risky(alpha, d, t, dt):
    ctx = ScoreContext(alpha)
    assert score(ctx, 0.0, d, t, dt) > score(ctx, 0.5, d, t, dt)


@given(st.floats(0, 1000), st.sampled_from([0.0, 0.25, 0.5, 0.75]))
def test_efficiency_identity(dt, rho):
    assert routing_efficiency(dt, rho) * (1 - rho) == pytest.approx(dt, rel=1e-15, abs=1e-12)
