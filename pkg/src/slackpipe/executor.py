"""Event-driven replay of a fixed per-stage operator order.

Each stage starts its next op as soon as it is idle and the op's inputs have
arrived:

* F(i, j): F(i-1, j) end + c[i-1]  (time 0 on stage 0)
* B(i, j): F(i, j) end, and B(i+1, j) end + c[i] unless i is the last stage
* W(i, j): B(i, j) end

Under :class:`SequentialLaunch` every finished F/B also launches a send on its
outgoing link.  A send occupies one of ``queue_capacity`` slots for ``c``;
when all slots are taken the stage blocks until the oldest send drains, which
is how head-of-line blocking stalls compute.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .model import (
    DeadlockDetected,
    Metrics,
    Operator,
    OpKind,
    PipelineSpec,
    ScheduledOp,
    SpecError,
    Timeline,
    bubble_rates,
    us_to_ms,
)


@dataclass(frozen=True)
class Decoupled:
    """Transfers never occupy the stage."""

    def label(self) -> str:
        return "decoupled"


@dataclass(frozen=True)
class SequentialLaunch:
    """Bounded per-link send queue; links in ``delegated_links`` behave as decoupled."""

    queue_capacity: int = 1
    delegated_links: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.queue_capacity < 1:
            raise SpecError("queue_capacity must be >= 1")
        object.__setattr__(self, "delegated_links", frozenset(self.delegated_links))

    def label(self) -> str:
        return f"seq:{self.queue_capacity}"


CommModel = Decoupled | SequentialLaunch


def parse_comm(text: str) -> CommModel:
    if text == "decoupled":
        return Decoupled()
    if text.startswith("seq:"):
        return SequentialLaunch(int(text[4:]))
    raise ValueError(f"unknown comm model {text!r} (expected 'decoupled' or 'seq:K')")


@dataclass(frozen=True)
class ReplayResult:
    timeline: Timeline
    metrics: Metrics


def _check_order(spec: PipelineSpec, order: Sequence[Sequence[Operator]]) -> None:
    S, N = spec.num_stages, spec.num_microbatches
    if len(order) != S:
        raise SpecError(f"order has {len(order)} stages, spec has {S}")
    expected = {(k, j) for k in OpKind for j in range(1, N + 1)}
    for i, ops in enumerate(order):
        got = [(o.kind, o.microbatch) for o in ops]
        if any(o.stage != i for o in ops) or len(got) != len(expected) or set(got) != expected:
            raise SpecError(f"stage {i} order must list each F/B/W of microbatches 1..{N} exactly once")


def replay_timeline(spec: PipelineSpec, order: Sequence[Sequence[Operator]],
                    comm: CommModel = Decoupled()) -> Timeline:
    _check_order(spec, order)
    S = spec.num_stages
    dur = spec.durations_us()
    c = spec.latency_us()
    seq = isinstance(comm, SequentialLaunch)

    pos = [0] * S
    free = [0] * S
    end: dict[tuple[OpKind, int, int], int] = {}
    arrive: dict[tuple[OpKind, int, int], int] = {}
    # (sender stage, link) -> finish times of the most recent sends
    queues: dict[tuple[int, int], deque[int]] = {}
    placed: list[list[ScheduledOp]] = [[] for _ in range(S)]

    def ready_time(op: Operator) -> int | None:
        i, j = op.stage, op.microbatch
        if op.kind is OpKind.F:
            return 0 if i == 0 else arrive.get((OpKind.F, i - 1, j))
        if op.kind is OpKind.B:
            f = end.get((OpKind.F, i, j))
            if f is None or i == S - 1:
                return f
            b = arrive.get((OpKind.B, i + 1, j))
            return None if b is None else max(f, b)
        return end.get((OpKind.B, i, j))

    progress = True
    while progress:
        progress = False
        for i in range(S):
            ops = order[i]
            while pos[i] < len(ops):
                op = ops[pos[i]]
                r = ready_time(op)
                if r is None:
                    break
                start = max(free[i], r)
                finish = start + dur[i][op.kind]
                key = (op.kind, i, op.microbatch)
                end[key] = finish
                placed[i].append(ScheduledOp(op, start, finish))
                free[i] = finish
                pos[i] += 1
                progress = True

                link = None
                if op.kind is OpKind.F and i < S - 1:
                    link = i
                elif op.kind is OpKind.B and i > 0:
                    link = i - 1
                if link is None:
                    continue
                launch = finish
                if seq and c[link] > 0 and link not in comm.delegated_links:
                    q = queues.setdefault((i, link), deque(maxlen=comm.queue_capacity))
                    if len(q) == comm.queue_capacity:
                        launch = max(finish, q[0])
                    q.append(launch + c[link])
                    free[i] = launch
                arrive[key] = launch + c[link]

    if any(pos[i] < len(order[i]) for i in range(S)):
        frontier = [(i, order[i][pos[i]] if pos[i] < len(order[i]) else None) for i in range(S)]
        raise DeadlockDetected(frontier)
    return Timeline(tuple(tuple(p) for p in placed))


def peak_activations(timeline: Timeline) -> list[int]:
    """Per stage, max of (#F completed - #B completed) sampled at completions."""
    peaks = []
    for ops in timeline.per_stage:
        events = sorted(
            (s.end_us, 0 if s.op.kind is OpKind.B else 1, s.op.kind) for s in ops if s.op.kind is not OpKind.W
        )
        live = peak = 0
        for _, _, kind in events:
            live += 1 if kind is OpKind.F else -1
            peak = max(peak, live)
        peaks.append(peak)
    return peaks


def compute_metrics(timeline: Timeline, baseline_makespan_us: int) -> Metrics:
    interior, util = bubble_rates(timeline)
    return Metrics(
        makespan_ms=us_to_ms(timeline.makespan_us),
        interior_bubble_rate=interior,
        utilization_bubble_rate=util,
        peak_activations=tuple(peak_activations(timeline)),
        accumulated_delay_ms=us_to_ms(timeline.makespan_us - baseline_makespan_us),
    )


def replay(spec: PipelineSpec, order: Sequence[Sequence[Operator]],
           comm: CommModel = Decoupled()) -> ReplayResult:
    timeline = replay_timeline(spec, order, comm)
    zero = spec.with_latency((0,) * (spec.num_stages - 1))
    base = replay_timeline(zero, order, comm)
    return ReplayResult(timeline, compute_metrics(timeline, base.makespan_us))


def accumulated_delay(spec: PipelineSpec, order: Sequence[Sequence[Operator]],
                      comm: CommModel = Decoupled()) -> int | float:
    """Makespan under the spec's latencies minus makespan at zero latency, in ms."""
    return replay(spec, order, comm).metrics.accumulated_delay_ms
