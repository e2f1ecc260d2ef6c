"""Domain types shared by the planner, generator, replay engine and campaign runner.

Durations on the public surface are milliseconds (int or float).  Every engine
works on integer microseconds so golden makespans are reproduced exactly; use
:func:`ms_to_us` / :func:`us_to_ms` at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class SlackpipeError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


class PlanError(SlackpipeError, ValueError):
    pass


class SpecError(SlackpipeError, ValueError):
    pass


class DeadlockDetected(SlackpipeError, RuntimeError):
    def __init__(self, frontier: Sequence[tuple[int, "Operator | None"]]):
        self.frontier = list(frontier)
        parts = [f"stage {i}: {op.label() if op else 'done'}" for i, op in self.frontier]
        super().__init__("no stage can progress; blocked frontier: " + ", ".join(parts))


def ms_to_us(ms: float) -> int:
    if not math.isfinite(ms):
        raise SpecError(f"non-finite duration {ms!r}")
    return int(round(ms * 1000))


def us_to_ms(us: int) -> int | float:
    """Whole milliseconds come back as int so JSON stays tidy."""
    q, r = divmod(us, 1000)
    return q if r == 0 else us / 1000


class OpKind(str, Enum):
    F = "F"
    B = "B"
    W = "W"


# steady-phase priority: B > F > W
PRIORITY = {OpKind.B: 3, OpKind.F: 2, OpKind.W: 1}


@dataclass(frozen=True, order=True)
class Operator:
    kind: OpKind
    stage: int
    microbatch: int

    def label(self) -> str:
        return f"{self.kind.value}{self.microbatch}@{self.stage}"


@dataclass(frozen=True)
class StageProfile:
    stage_index: int
    t_f: float
    t_b: float
    t_w: float = 0

    def __post_init__(self):
        for name in ("t_f", "t_b", "t_w"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise SpecError(f"stage {self.stage_index}: {name} must be finite")
        if self.t_f <= 0 or self.t_b <= 0:
            raise SpecError(f"stage {self.stage_index}: t_f and t_b must be > 0")
        if self.t_w < 0:
            raise SpecError(f"stage {self.stage_index}: t_w must be >= 0")

    def duration_us(self, kind: OpKind) -> int:
        if kind is OpKind.F:
            return ms_to_us(self.t_f)
        if kind is OpKind.B:
            return ms_to_us(self.t_b)
        return ms_to_us(self.t_w)


@dataclass(frozen=True)
class PipelineSpec:
    num_stages: int
    num_microbatches: int
    profiles: tuple[StageProfile, ...]
    comm_latency: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        object.__setattr__(self, "comm_latency", tuple(self.comm_latency))
        S = self.num_stages
        if S < 1:
            raise SpecError("num_stages must be >= 1")
        if self.num_microbatches < 1:
            raise SpecError("num_microbatches must be >= 1")
        if len(self.profiles) != S:
            raise SpecError(f"expected {S} stage profiles, got {len(self.profiles)}")
        for i, p in enumerate(self.profiles):
            if p.stage_index != i:
                raise SpecError(f"profile {i} has stage_index {p.stage_index}")
        if len(self.comm_latency) != S - 1:
            raise SpecError(f"expected {S - 1} link latencies, got {len(self.comm_latency)}")
        for i, c in enumerate(self.comm_latency):
            if not math.isfinite(c) or c < 0:
                raise SpecError(f"link {i}: latency must be finite and >= 0, got {c!r}")

    @classmethod
    def uniform(cls, num_stages: int, num_microbatches: int, t: float = 10,
                comm_latency: Iterable[float] | None = None, t_w: float | None = None) -> "PipelineSpec":
        tw = t if t_w is None else t_w
        profiles = tuple(StageProfile(i, t, t, tw) for i in range(num_stages))
        c = tuple(comm_latency) if comm_latency is not None else (0,) * (num_stages - 1)
        return cls(num_stages, num_microbatches, profiles, c)

    def with_latency(self, comm_latency: Iterable[float]) -> "PipelineSpec":
        return PipelineSpec(self.num_stages, self.num_microbatches, self.profiles, tuple(comm_latency))

    def with_microbatches(self, n: int) -> "PipelineSpec":
        return PipelineSpec(self.num_stages, n, self.profiles, self.comm_latency)

    def latency_us(self) -> list[int]:
        return [ms_to_us(c) for c in self.comm_latency]

    def durations_us(self) -> list[dict[OpKind, int]]:
        return [{k: p.duration_us(k) for k in OpKind} for p in self.profiles]

    def longest_op_us(self) -> int:
        return max(max(d.values()) for d in self.durations_us())


@dataclass(frozen=True)
class MemoryModel:
    capacity: float
    per_activation: float

    def __post_init__(self):
        if self.capacity <= 0 or self.per_activation <= 0:
            raise SpecError("memory capacity and per-activation size must be > 0")
        if self.capacity < self.per_activation:
            raise SpecError("capacity must hold at least one activation")


@dataclass(frozen=True)
class WarmupPlan:
    x: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(int(v) for v in self.x))

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class Slackness:
    delta: tuple[int, ...]


@dataclass(frozen=True)
class Violation:
    constraint: str
    stages: tuple[int, ...]
    message: str


def validate_plan(spec: PipelineSpec, plan: WarmupPlan) -> list[Violation]:
    """Return every violated plan constraint; an empty list means the plan is usable."""
    S, N = spec.num_stages, spec.num_microbatches
    x = plan.x
    if len(x) != S:
        return [Violation("length", (), f"plan has {len(x)} entries, pipeline has {S} stages")]
    out = []
    if x[-1] < 1:
        out.append(Violation("last-stage", (S - 1,), f"x[{S - 1}]={x[-1]} must be >= 1"))
    for i in range(S - 1):
        if x[i] < x[i + 1]:
            out.append(Violation("monotone", (i, i + 1), f"x[{i}]={x[i]} < x[{i + 1}]={x[i + 1]}"))
    if x[0] > N:
        out.append(Violation("microbatches", (0,), f"x[0]={x[0]} exceeds N={N}"))
    return out


def ensure_valid(spec: PipelineSpec, plan: WarmupPlan) -> None:
    problems = validate_plan(spec, plan)
    if problems:
        raise PlanError("; ".join(v.message for v in problems))


def slackness_of(plan: WarmupPlan) -> Slackness:
    x = plan.x
    delta = tuple(x[i] - x[i + 1] for i in range(len(x) - 1))
    bad = [i for i, d in enumerate(delta) if d < 0]
    if bad:
        raise PlanError(f"non-monotone warm-up counts at links {bad}")
    return Slackness(delta)


@dataclass(frozen=True)
class ScheduledOp:
    op: Operator
    start_us: int
    end_us: int

    @property
    def duration_us(self) -> int:
        return self.end_us - self.start_us


@dataclass(frozen=True)
class Timeline:
    per_stage: tuple[tuple[ScheduledOp, ...], ...]
    makespan_us: int = field(default=-1)

    def __post_init__(self):
        per_stage = tuple(tuple(ops) for ops in self.per_stage)
        object.__setattr__(self, "per_stage", per_stage)
        ends = [s.end_us for ops in per_stage for s in ops]
        object.__setattr__(self, "makespan_us", max(ends, default=0))

    @property
    def num_stages(self) -> int:
        return len(self.per_stage)

    @property
    def makespan_ms(self) -> int | float:
        return us_to_ms(self.makespan_us)

    def order(self) -> list[list[Operator]]:
        return [[s.op for s in ops] for ops in self.per_stage]

    def warmup_counts(self) -> list[int]:
        """Number of forwards each stage runs before its first backward."""
        counts = []
        for ops in self.per_stage:
            n = 0
            for s in ops:
                if s.op.kind is not OpKind.F:
                    break
                n += 1
            counts.append(n)
        return counts

    def idle_intervals(self, stage: int) -> list[tuple[int, int]]:
        gaps = []
        ops = self.per_stage[stage]
        for a, b in zip(ops, ops[1:]):
            if b.start_us > a.end_us:
                gaps.append((a.end_us, b.start_us))
        return gaps


def check_timeline(spec: PipelineSpec, timeline: Timeline) -> list[str]:
    """Structural and dependency check of a timeline against a spec.

    Readiness is re-derived from scratch (latencies included), so this is
    independent of whichever engine produced the timeline.
    """
    S, N = spec.num_stages, spec.num_microbatches
    errors = []
    if timeline.num_stages != S:
        return [f"timeline has {timeline.num_stages} stages, spec has {S}"]
    dur = spec.durations_us()
    c = spec.latency_us()
    end: dict[tuple[OpKind, int, int], int] = {}
    start: dict[tuple[OpKind, int, int], int] = {}
    for i, ops in enumerate(timeline.per_stage):
        prev_end = 0
        seen = set()
        for s in ops:
            op = s.op
            key = (op.kind, op.stage, op.microbatch)
            if op.stage != i:
                errors.append(f"{op.label()} listed under stage {i}")
            if not 1 <= op.microbatch <= N:
                errors.append(f"{op.label()} microbatch out of range")
            if key in seen:
                errors.append(f"{op.label()} appears twice")
            seen.add(key)
            if s.start_us < prev_end:
                errors.append(f"{op.label()} overlaps previous op on stage {i}")
            if s.end_us - s.start_us != dur[i][op.kind]:
                errors.append(f"{op.label()} has wrong duration")
            prev_end = s.end_us
            end[key] = s.end_us
            start[key] = s.start_us
        if len(seen) != 3 * N:
            errors.append(f"stage {i} has {len(seen)} ops, expected {3 * N}")
    if errors:
        return errors
    for (kind, i, j), st in start.items():
        if kind is OpKind.F:
            ready = 0 if i == 0 else end[(OpKind.F, i - 1, j)] + c[i - 1]
        elif kind is OpKind.B:
            ready = end[(OpKind.F, i, j)]
            if i < S - 1:
                ready = max(ready, end[(OpKind.B, i + 1, j)] + c[i])
        else:
            ready = end[(OpKind.B, i, j)]
        if st < ready:
            errors.append(f"{kind.value}{j}@{i} starts at {st}us before ready {ready}us")
    return errors


@dataclass(frozen=True)
class Metrics:
    makespan_ms: float
    interior_bubble_rate: float
    utilization_bubble_rate: float
    peak_activations: tuple[int, ...]
    accumulated_delay_ms: float


def bubble_rates(timeline: Timeline) -> tuple[float, float]:
    """(interior, utilization) bubble rates; both lie in [0, 1]."""
    span_total = busy_total = 0
    for ops in timeline.per_stage:
        if not ops:
            continue
        span_total += ops[-1].end_us - ops[0].start_us
        busy_total += sum(s.duration_us for s in ops)
    interior = (span_total - busy_total) / span_total if span_total else 0.0
    denom = timeline.num_stages * timeline.makespan_us
    util = 1 - busy_total / denom if denom else 0.0
    return interior, util
