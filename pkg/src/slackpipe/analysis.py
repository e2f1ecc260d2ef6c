"""Analytical delay model: when a slow link is absorbed by slackness and what it costs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .model import PipelineSpec, SpecError, WarmupPlan, ensure_valid, slackness_of


class Regime(str, Enum):
    ABSORBED = "Absorbed"
    CASCADING = "Cascading"


@dataclass(frozen=True)
class DelayRegime:
    link: int
    variant: Regime
    threshold_ms: float
    estimate_ms: float


def _check_link(spec: PipelineSpec, link: int) -> None:
    if not 0 <= link < spec.num_stages - 1:
        raise SpecError(f"link index {link} out of range for {spec.num_stages} stages")


def absorption_holds(spec: PipelineSpec, delta_i: int, link: int) -> bool:
    """Whether link ``link`` with slackness ``delta_i`` absorbs its latency.

    Checks ``t_f[i] + t_b[i] + 2 c[i] <= delta_i * (t_f[i+1] + t_b[i+1])``.
    A zero-latency link is always absorbed: it cannot introduce bubbles, even
    with ``delta_i == 0`` where the inequality itself would fail.
    """
    _check_link(spec, link)
    if delta_i < 0:
        raise SpecError("slackness must be >= 0")
    c = spec.comm_latency[link]
    if c == 0:
        return True
    up, down = spec.profiles[link], spec.profiles[link + 1]
    return up.t_f + up.t_b + 2 * c <= delta_i * (down.t_f + down.t_b)


def absorption_threshold(spec: PipelineSpec, delta_i: int, link: int) -> float:
    """Largest latency on ``link`` still absorbed, clamped at 0.

    Reduces to ``(delta_i - 1) * t`` when all durations equal ``t``.
    """
    up, down = spec.profiles[link], spec.profiles[link + 1]
    return max(0.0, (delta_i * (down.t_f + down.t_b) - up.t_f - up.t_b) / 2)


def classify_delay(spec: PipelineSpec, plan: WarmupPlan, link: int) -> DelayRegime:
    ensure_valid(spec, plan)
    _check_link(spec, link)
    delta = slackness_of(plan).delta[link]
    c = spec.comm_latency[link]
    threshold = absorption_threshold(spec, delta, link)
    if absorption_holds(spec, delta, link):
        return DelayRegime(link, Regime.ABSORBED, threshold, float(c))
    # asymptotic form with unit constant
    estimate = spec.num_microbatches * c / (delta + 1)
    return DelayRegime(link, Regime.CASCADING, threshold, float(estimate))


def classify_all(spec: PipelineSpec, plan: WarmupPlan) -> list[DelayRegime]:
    return [classify_delay(spec, plan, i) for i in range(spec.num_stages - 1)]


def total_estimate(spec: PipelineSpec, plan: WarmupPlan) -> float:
    """Accumulated delay estimate: per-link contributions simply add up."""
    return sum(r.estimate_ms for r in classify_all(spec, plan))
