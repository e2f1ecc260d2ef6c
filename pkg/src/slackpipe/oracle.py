"""Exact minimum makespan for tiny pipelines by branch and bound.

The search builds active schedules (Giffler-Thompson branching): among all
eligible operators find the earliest possible completion C*, then branch only
on operators of that stage that could start before C*.  Active schedules
contain an optimum for makespan, and replaying a witness order through the
executor reproduces its times exactly.

Within a stage, operators of one kind run in microbatch order.  Microbatches
are interchangeable, so this loses nothing; the test suite checks it against
unrestricted enumeration of every per-stage order on the smallest instances.

States are keyed on per-stage progress, stage-free times and the arrival
times still awaited by unscheduled successors.  Revisiting a state can never
beat the incumbent, so a plain visited set suffices.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

from .model import (
    PRIORITY,
    Operator,
    OpKind,
    PipelineSpec,
    SlackpipeError,
    WarmupPlan,
    us_to_ms,
)

MAX_STAGES = 3
MAX_MICROBATCHES = 5


class InstanceTooLarge(SlackpipeError, ValueError):
    pass


class InfeasiblePlan(SlackpipeError, ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    makespan_us: int
    order: tuple[tuple[Operator, ...], ...]
    nodes: int

    @property
    def makespan_ms(self) -> int | float:
        return us_to_ms(self.makespan_us)


def optimal_makespan(spec: PipelineSpec, plan_constraint: WarmupPlan | None = None) -> OracleResult:
    S, N = spec.num_stages, spec.num_microbatches
    if S > MAX_STAGES or N > MAX_MICROBATCHES:
        raise InstanceTooLarge(f"oracle is limited to S<={MAX_STAGES}, N<={MAX_MICROBATCHES} (got S={S}, N={N})")
    x = None
    if plan_constraint is not None:
        x = plan_constraint.x
        if len(x) != S or any(v < 1 or v > N for v in x):
            raise InfeasiblePlan(f"warm-up counts {list(x)} do not fit S={S}, N={N}")

    dur = spec.durations_us()
    c = spec.latency_us()
    work = [N * sum(d.values()) for d in dur]

    nF, nB, nW = [0] * S, [0] * S, [0] * S
    free = [0] * S
    rem = list(work)
    f_arr: dict[tuple[int, int], int] = {}   # F(i, j) output available at stage i+1
    b_arr: dict[tuple[int, int], int] = {}   # B(i, j) output available at stage i-1
    trail: list[Operator] = []

    best = [sys.maxsize, None]
    visited: set = set()
    nodes = 0

    def candidates():
        out = []
        for i in range(S):
            j = nF[i] + 1
            if j <= N and (x is None or nB[i] > 0 or nF[i] < x[i]):
                if i == 0:
                    out.append((free[i], OpKind.F, i, j))
                elif nF[i - 1] >= j:
                    out.append((max(free[i], f_arr[(i - 1, j)]), OpKind.F, i, j))
            j = nB[i] + 1
            if j <= nF[i] and (x is None or nF[i] >= x[i]):
                if i == S - 1:
                    out.append((free[i], OpKind.B, i, j))
                elif nB[i + 1] >= j:
                    out.append((max(free[i], b_arr[(i + 1, j)]), OpKind.B, i, j))
            j = nW[i] + 1
            if j <= nB[i]:
                out.append((free[i], OpKind.W, i, j))
        return out

    def key():
        fa = tuple(f_arr[(i, j)] for i in range(S - 1) for j in range(nF[i + 1] + 1, nF[i] + 1))
        ba = tuple(b_arr[(i, j)] for i in range(1, S) for j in range(nB[i - 1] + 1, nB[i] + 1))
        return (tuple(nF), tuple(nB), tuple(nW), tuple(free), fa, ba)

    def search():
        nonlocal nodes
        nodes += 1
        lb = max(f + r for f, r in zip(free, rem))
        if lb >= best[0]:
            return
        cands = candidates()
        if not cands:
            if all(nW[i] == N for i in range(S)):
                best[0] = max(free)
                best[1] = list(trail)
            return
        k = key()
        if k in visited:
            return
        visited.add(k)

        ect = [(est + dur[i][kind], i) for est, kind, i, _ in cands]
        c_star, m_star = min(ect)
        branch = [cd for cd, (e, i) in zip(cands, ect) if i == m_star and (cd[0] < c_star or e == c_star)]
        branch.sort(key=lambda cd: (cd[0], -PRIORITY[cd[1]], cd[3]))
        for est, kind, i, j in branch:
            saved_free = free[i]
            finish = est + dur[i][kind]
            free[i] = finish
            rem[i] -= dur[i][kind]
            if kind is OpKind.F:
                nF[i] += 1
                if i < S - 1:
                    f_arr[(i, j)] = finish + c[i]
            elif kind is OpKind.B:
                nB[i] += 1
                if i > 0:
                    b_arr[(i, j)] = finish + c[i - 1]
            else:
                nW[i] += 1
            trail.append(Operator(kind, i, j))

            search()

            trail.pop()
            if kind is OpKind.F:
                nF[i] -= 1
                f_arr.pop((i, j), None)
            elif kind is OpKind.B:
                nB[i] -= 1
                b_arr.pop((i, j), None)
            else:
                nW[i] -= 1
            rem[i] += dur[i][kind]
            free[i] = saved_free

    search()
    if best[1] is None:
        raise InfeasiblePlan("no schedule satisfies the warm-up constraint")
    order = tuple(tuple(op for op in best[1] if op.stage == i) for i in range(S))
    return OracleResult(best[0], order, nodes)
