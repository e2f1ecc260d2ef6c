"""Full-pipeline schedule generation by discrete-time simulation.

Every ``step_us`` the loop visits stages in ascending order; an idle stage asks
:func:`select_op` for its next operator among those whose dependencies have
arrived.  Stage ``i`` first runs exactly ``x[i]`` forwards (warm-up) and then
waits for its first B.  In the steady phase the default "slack" policy keeps
``x[i]`` live activations: F leads while fewer are held, B > W otherwise.
The "greedy" policy is the bare B > F > W rule.  Lowest microbatch first
within a kind.

Successor readiness (completion-based, with link latency ``c``):

* F(i, j) done    -> F(i+1, j) ready at end + c[i]; at the last stage B(i, j) ready at end
* B(i, j) done    -> B(i-1, j) ready at end + c[i-1]; W(i, j) ready at end
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable

from .model import (
    PRIORITY,
    DeadlockDetected,
    Operator,
    OpKind,
    PipelineSpec,
    ScheduledOp,
    Timeline,
    WarmupPlan,
    ensure_valid,
)

DEFAULT_GRANULARITY = 30


@dataclass(frozen=True)
class GenConfig:
    """Generator settings.

    ``step_us`` of None means ``ceil(t_o / 30)`` for the spec at hand.
    ``policy`` "slack" (default) closes the warm-up with the first B and keeps
    each stage at ``x[i]`` live activations in the steady phase; "greedy" is
    the bare B > F > W rule, which may run extra forwards when no B is ready
    and may drain queued Bs back-to-back, eroding slackness.
    """

    step_us: int | None = None
    policy: str = "slack"

    def __post_init__(self):
        if self.policy not in ("slack", "greedy"):
            raise ValueError(f"unknown generator policy {self.policy!r}")

    def resolve(self, spec: PipelineSpec) -> int:
        if self.step_us is None:
            return default_step_us(spec)
        if self.step_us <= 0:
            raise ValueError("time step must be > 0")
        return self.step_us


@dataclass(frozen=True)
class GenResult:
    timeline: Timeline
    steps: int
    step_us: int


def default_step_us(spec: PipelineSpec, granularity: int = DEFAULT_GRANULARITY) -> int:
    return -(-spec.longest_op_us() // granularity)


def step_bound(spec: PipelineSpec, step_us: int, with_latency: bool = False) -> int:
    """``3 N S ceil(t_o / step) + S``; the extra S covers the final drain.

    The formula counts only steps in which some stage computes.  Steps where
    every stage idles waiting on a transfer are extra; ``with_latency`` adds
    ``2 N ceil(c_i / step)`` per link to cover them.
    """
    S, N = spec.num_stages, spec.num_microbatches
    bound = 3 * N * S * math.ceil(spec.longest_op_us() / step_us) + S
    if with_latency:
        bound += 2 * N * sum(-(-c // step_us) for c in spec.latency_us())
    return bound


def select_op(stage: int, available: Iterable[Operator], remaining_warmups: int,
              awaiting_first_backward: bool = False, held: int | None = None,
              target: int | None = None) -> Operator | None:
    """Pick the operator a stage should launch now, or None to stay idle.

    ``available`` holds only ready operators.  The caller owns the warm-up
    counter and must decrement it when an F is returned while it is positive.

    With only the first three arguments this is the plain two-phase rule:
    forwards during warm-up, then B > F > W.  ``awaiting_first_backward``
    makes the stage wait for its first B once the warm-up quota is spent.
    ``held``/``target`` (live activations and the stage's warm-up count) turn
    on the activation target: below it F outranks B, at it F is not allowed.
    """
    ops = list(available)
    if not ops:
        return None
    if remaining_warmups > 0:
        fwd = [o for o in ops if o.kind is OpKind.F]
        return min(fwd, key=lambda o: o.microbatch) if fwd else None
    if awaiting_first_backward:
        bwd = [o for o in ops if o.kind is OpKind.B]
        return min(bwd, key=lambda o: o.microbatch) if bwd else None
    if target is None or held is None:
        return max(ops, key=lambda o: (PRIORITY[o.kind], -o.microbatch))
    rank = {OpKind.F: 4 if held < target else 0, OpKind.B: 3, OpKind.W: 1}
    best = max(ops, key=lambda o: (rank[o.kind], -o.microbatch))
    return best if rank[best.kind] else None


def generate(spec: PipelineSpec, plan: WarmupPlan, gen: GenConfig = GenConfig()) -> GenResult:
    ensure_valid(spec, plan)
    step = gen.resolve(spec)
    positive = [d for ds in spec.durations_us() for d in ds.values() if d > 0]
    if step > min(positive):
        warnings.warn(f"time step {step}us exceeds the shortest operator ({min(positive)}us)", stacklevel=2)

    S, N = spec.num_stages, spec.num_microbatches
    dur = spec.durations_us()
    c = spec.latency_us()
    # per stage: list of (ready_us, Operator)
    pending: list[list[tuple[int, Operator]]] = [[] for _ in range(S)]
    pending[0] = [(0, Operator(OpKind.F, 0, j)) for j in range(1, N + 1)]
    warm = list(plan.x)
    slack = gen.policy == "slack"
    first_b = [not slack] * S
    held = [0] * S

    def choose(i: int, ready: list[Operator]) -> Operator | None:
        if slack:
            return select_op(i, ready, warm[i], not first_b[i], held[i], plan.x[i])
        return select_op(i, ready, warm[i])
    busy_until = [0] * S
    placed: list[list[ScheduledOp]] = [[] for _ in range(S)]
    remaining = 3 * N * S
    now = 0
    steps = 0

    while remaining:
        steps += 1
        for i in range(S):
            while busy_until[i] <= now and pending[i]:
                ready = [op for r, op in pending[i] if r <= now]
                op = choose(i, ready)
                if op is None:
                    break
                if warm[i] > 0:
                    warm[i] -= 1
                if op.kind is OpKind.B:
                    first_b[i] = True
                    held[i] -= 1
                elif op.kind is OpKind.F:
                    held[i] += 1
                pending[i] = [(r, o) for r, o in pending[i] if o != op]
                end = now + dur[i][op.kind]
                busy_until[i] = end
                placed[i].append(ScheduledOp(op, now, end))
                remaining -= 1
                j = op.microbatch
                if op.kind is OpKind.F:
                    if i < S - 1:
                        pending[i + 1].append((end + c[i], Operator(OpKind.F, i + 1, j)))
                    else:
                        pending[i].append((end, Operator(OpKind.B, i, j)))
                elif op.kind is OpKind.B:
                    pending[i].append((end, Operator(OpKind.W, i, j)))
                    if i > 0:
                        pending[i - 1].append((end + c[i - 1], Operator(OpKind.B, i - 1, j)))
        if remaining and all(b <= now for b in busy_until) and not any(
            r > now for p in pending for r, _ in p
        ) and not any(choose(i, [o for _, o in pending[i]]) for i in range(S)):
            frontier = [(i, min((o for _, o in pending[i]), default=None)) for i in range(S)]
            raise DeadlockDetected(frontier)
        now += step

    return GenResult(Timeline(tuple(tuple(p) for p in placed)), steps, step)


def generate_schedule(spec: PipelineSpec, plan: WarmupPlan, gen: GenConfig = GenConfig()) -> Timeline:
    return generate(spec, plan, gen).timeline


def step_count(spec: PipelineSpec, plan: WarmupPlan, gen: GenConfig = GenConfig()) -> int:
    return generate(spec, plan, gen).steps
