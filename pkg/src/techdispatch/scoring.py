"""Assignment score trading service urgency against routing efficiency.

Higher scores are better.  ``alpha = 0`` ranks purely by urgency, ``alpha = 1``
purely by (risk-inflated) insertion time.
"""

from __future__ import annotations

from dataclasses import dataclass

MAX_EXPONENT = 64


@dataclass(frozen=True)
class ScoreContext:
    alpha: float
    eta: float = 1.1
    rework_prob: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "alpha", min(max(float(self.alpha), 0.0), 1.0))


def service_urgency(rho: float, deadline: int, t: int, eta: float) -> float:
    """Expected inconvenience increase saved by the visit.

    Unlike the cost function this stays positive before the deadline, so
    earlier deadlines rank higher even when nothing is due yet.
    """
    exponent = t - deadline + 1
    if abs(exponent) > MAX_EXPONENT:
        raise OverflowError(f"urgency exponent {exponent} out of range")
    return (1.0 - rho) * eta**exponent


def routing_efficiency(delta_tau: float, rho: float) -> float:
    """Insertion time plus the expected time of all repeat visits."""
    if rho >= 1.0:
        raise ZeroDivisionError("rework probability 1 makes the repeat series diverge")
    return delta_tau / (1.0 - rho)


def score(ctx: ScoreContext, rho: float, deadline: int, t: int, delta_tau: float) -> float:
    a = ctx.alpha
    return (1.0 - a) * service_urgency(rho, deadline, t, ctx.eta) - a * routing_efficiency(
        delta_tau, rho
    )
