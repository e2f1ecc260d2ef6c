"""Warm-up forward-count planning.

``init_warmup`` spreads the memory-bounded activation budget as evenly as
possible over the links (max-min slackness).  ``adapt_warmup`` sizes each
link's slackness to absorb its observed latency, ignoring device memory.
"""

from __future__ import annotations

from typing import Sequence

from .model import (
    MemoryModel,
    PipelineSpec,
    PlanError,
    StageProfile,
    WarmupPlan,
    ms_to_us,
)


def init_warmup(S: int, mem: MemoryModel) -> WarmupPlan:
    if S < 2:
        raise PlanError("initial planning needs at least 2 stages")
    x_max = int(mem.capacity // mem.per_activation)
    if x_max < 1:
        raise PlanError("memory holds no activation")
    avg, r = divmod(x_max - 1, S - 1)
    x = [x_max]
    for i in range(1, S):
        x.append(x[-1] - (avg + 1 if i <= r else avg))
    return WarmupPlan(tuple(x))


def required_slackness(profiles: Sequence[StageProfile], c: Sequence[float], link: int) -> int:
    """Smallest slackness that absorbs ``c[link]``, in exact integer arithmetic."""
    up, down = profiles[link], profiles[link + 1]
    num = ms_to_us(up.t_f) + ms_to_us(up.t_b) + 2 * ms_to_us(c[link])
    den = ms_to_us(down.t_f) + ms_to_us(down.t_b)
    return -(-num // den)


def adapt_warmup(S: int, N: int, profiles: Sequence[StageProfile], c: Sequence[float]) -> WarmupPlan:
    """Delay-aware warm-up counts, built backwards from ``x[S-1] = 1``.

    Each link gets ``min(N - 2S, max(required_slackness, 2))``.  When several
    links are slow the per-link clip alone can push ``x[0]`` past ``N``; the
    total slackness is then capped at ``N - S`` (so ``x[0] <= N - (S - 1)``)
    by trimming, one unit at a time, the nonzero link with the largest surplus
    over its absorption requirement (ties go to the highest link index).
    """
    if S < 2:
        raise PlanError("adaptive planning needs at least 2 stages")
    if N < 2 * S:
        raise PlanError(f"adaptive planning requires N >= 2S (N={N}, S={S})")
    if len(profiles) != S or len(c) != S - 1:
        raise PlanError("profiles/latencies do not match the stage count")
    for p in profiles:
        if p.t_f <= 0 or p.t_b <= 0:
            raise PlanError(f"stage {p.stage_index}: non-positive durations")
    clip = N - 2 * S
    need = [required_slackness(profiles, c, i) for i in range(S - 1)]
    delta = [min(clip, max(n, 2)) for n in need]
    budget = N - S
    while sum(delta) > budget:
        i = max((k for k in range(S - 1) if delta[k] > 0), key=lambda k: (delta[k] - need[k], k))
        delta[i] -= 1
    x = [1]
    for d in reversed(delta):
        x.append(x[-1] + d)
    return WarmupPlan(tuple(reversed(x)))


def adapt_for(spec: PipelineSpec) -> WarmupPlan:
    return adapt_warmup(spec.num_stages, spec.num_microbatches, spec.profiles, spec.comm_latency)
