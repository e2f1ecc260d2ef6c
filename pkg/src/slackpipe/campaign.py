"""Multi-iteration straggler-trace replay under a static or adaptive policy.

Static: one schedule planned for the base latencies, replayed every iteration
with the sequential-launch (bounded queue) comm model; a link failure costs one
checkpoint-restart penalty and the run continues at base latency.

Adaptive: whenever the effective latency vector changes, a new plan and
schedule are installed ``replan_lag_iters`` iterations later, and the links
whose latency differs from base are delegated (decoupled transfers).  Failed
links run at ``failure_fallback_latency_ms``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .executor import SequentialLaunch, replay_timeline
from .model import (
    MemoryModel,
    Operator,
    PipelineSpec,
    SlackpipeError,
    SpecError,
    WarmupPlan,
    ensure_valid,
    ms_to_us,
    us_to_ms,
)
from .planner import adapt_for, init_warmup
from .scheduler import GenConfig, generate_schedule

FAILURE = math.inf


class Policy(str, Enum):
    STATIC = "static"
    ADAPTIVE = "adaptive"


class CampaignError(SlackpipeError):
    def __init__(self, iteration: int, cause: Exception):
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"iteration {iteration}: {cause}")


@dataclass(frozen=True)
class StragglerEvent:
    iter_from: int
    iter_to: int
    links: frozenset[int]
    latency_ms: float

    def __post_init__(self):
        object.__setattr__(self, "links", frozenset(self.links))
        if self.iter_from > self.iter_to:
            raise SpecError(f"event spans {self.iter_from}..{self.iter_to}")
        if self.latency_ms < 0 or math.isnan(self.latency_ms):
            raise SpecError("event latency must be >= 0 or FAILURE")

    @property
    def is_failure(self) -> bool:
        return self.latency_ms == FAILURE

    def covers(self, k: int) -> bool:
        return self.iter_from <= k <= self.iter_to


@dataclass(frozen=True)
class CampaignConfig:
    total_iters: int
    base_spec: PipelineSpec
    policy: Policy
    restart_penalty_ms: float
    failure_fallback_latency_ms: float = 0.0
    replan_lag_iters: int = 0
    queue_capacity: int = 1
    memory: MemoryModel | None = None
    gen: GenConfig = GenConfig()

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        if self.total_iters < 0:
            raise SpecError("total_iters must be >= 0")
        if self.restart_penalty_ms < 0 or self.failure_fallback_latency_ms < 0:
            raise SpecError("restart penalty and fallback latency must be >= 0")
        if self.replan_lag_iters < 0:
            raise SpecError("replan_lag_iters must be >= 0")

    def initial_plan(self) -> WarmupPlan:
        if self.memory is not None:
            return init_warmup(self.base_spec.num_stages, self.memory)
        return adapt_for(self.base_spec)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    c_vector: tuple[float, ...]
    plan: tuple[int, ...]
    iter_time_ms: float
    penalty_ms: float
    cumulative_ms: float


@dataclass(frozen=True)
class CampaignResult:
    policy: Policy
    iterations: tuple[IterationRecord, ...]
    total_time_ms: float
    restarts: int
    throughput_mb_per_s: float


def effective_latency(base: Sequence[float], trace: Sequence[StragglerEvent], k: int) -> list[float]:
    """Per-link max over events active at iteration ``k`` (FAILURE dominates)."""
    c = list(base)
    hit = [False] * len(c)
    for ev in trace:
        if ev.covers(k):
            for link in ev.links:
                c[link] = ev.latency_ms if not hit[link] else max(c[link], ev.latency_ms)
                hit[link] = True
    return c


def _check_trace(spec: PipelineSpec, trace: Sequence[StragglerEvent]) -> None:
    for n, ev in enumerate(trace):
        bad = [link for link in ev.links if not 0 <= link < spec.num_stages - 1]
        if bad:
            raise SpecError(f"event {n} references links {sorted(bad)} outside 0..{spec.num_stages - 2}")


class _Engine:
    """Caches schedules per (plan, latencies) and replays per (schedule, latencies, comm)."""

    def __init__(self, spec: PipelineSpec, gen: GenConfig):
        self.spec = spec
        self.gen = gen
        self._orders: dict[tuple, list[list[Operator]]] = {}
        self._times: dict[tuple, int] = {}

    def order(self, plan: WarmupPlan, c: tuple[float, ...]) -> list[list[Operator]]:
        key = (plan.x, c)
        if key not in self._orders:
            spec = self.spec.with_latency(c)
            ensure_valid(spec, plan)
            self._orders[key] = generate_schedule(spec, plan, self.gen).order()
        return self._orders[key]

    def iter_time_us(self, plan: WarmupPlan, planned_c: tuple[float, ...], c: tuple[float, ...],
                     comm: SequentialLaunch) -> int:
        key = (plan.x, planned_c, c, comm)
        if key not in self._times:
            order = self.order(plan, planned_c)
            self._times[key] = replay_timeline(self.spec.with_latency(c), order, comm).makespan_us
        return self._times[key]


def run_campaign(cfg: CampaignConfig, trace: Sequence[StragglerEvent]) -> CampaignResult:
    spec = cfg.base_spec
    _check_trace(spec, trace)
    base = tuple(spec.comm_latency)
    S, N = spec.num_stages, spec.num_microbatches
    adaptive = cfg.policy is Policy.ADAPTIVE
    if adaptive and N < 2 * S:
        raise SpecError(f"adaptive policy requires N >= 2S (N={N}, S={S})")
    engine = _Engine(spec, cfg.gen)

    try:
        plan = cfg.initial_plan()
        engine.order(plan, base)
    except SlackpipeError as exc:
        raise CampaignError(0, exc) from exc
    planned_c = base
    delegated: frozenset[int] = frozenset()
    pending: tuple[tuple[float, ...], int] | None = None
    charged: set[int] = set()

    records = []
    total_us = 0
    restarts = 0
    for k in range(cfg.total_iters):
        raw = effective_latency(base, trace, k)
        penalty_us = 0
        if adaptive:
            c = tuple(cfg.failure_fallback_latency_ms if v == FAILURE else v for v in raw)
        else:
            c = tuple(base[i] if v == FAILURE else v for i, v in enumerate(raw))
            for n, ev in enumerate(trace):
                if ev.is_failure and ev.covers(k) and n not in charged:
                    charged.add(n)
                    restarts += 1
                    penalty_us += ms_to_us(cfg.restart_penalty_ms)

        try:
            if adaptive:
                target = pending[0] if pending else planned_c
                if c != target:
                    pending = (c, k + cfg.replan_lag_iters)
                if pending and k >= pending[1]:
                    planned_c = pending[0]
                    plan = adapt_for(spec.with_latency(planned_c))
                    delegated = frozenset(i for i in range(S - 1) if planned_c[i] != base[i])
                    pending = None
            comm = SequentialLaunch(cfg.queue_capacity, delegated)
            t_us = engine.iter_time_us(plan, planned_c, c, comm)
        except SlackpipeError as exc:
            raise CampaignError(k, exc) from exc

        total_us += t_us + penalty_us
        records.append(IterationRecord(k, c, plan.x, us_to_ms(t_us), us_to_ms(penalty_us), us_to_ms(total_us)))

    total_ms = us_to_ms(total_us)
    throughput = N * cfg.total_iters / (total_us / 1e6) if total_us else 0.0
    return CampaignResult(cfg.policy, tuple(records), total_ms, restarts, throughput)
