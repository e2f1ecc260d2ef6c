import itertools
import random

import pytest

from slackpipe.model import Operator, OpKind, PipelineSpec, StageProfile, WarmupPlan

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def report():
    """Record one acceptance line: report(name, passed, detail)."""
    def add(name: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((name, passed, detail))
    return add


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


def ideal_spec(c=(0, 0, 0), n=12):
    return PipelineSpec.uniform(4, n, 10, list(c))


IDEAL_PLAN = WarmupPlan((7, 5, 3, 1))


def random_small_instance(rng: random.Random) -> PipelineSpec:
    """S in {2,3}, N in 2..5, durations 5..20 ms, c 0..15 ms."""
    S = rng.choice([2, 3])
    N = rng.randint(2, 5)
    prof = [StageProfile(i, rng.randint(5, 20), rng.randint(5, 20), rng.randint(5, 20)) for i in range(S)]
    c = [rng.randint(0, 15) for _ in range(S - 1)]
    return PipelineSpec(S, N, prof, c)


def all_plans(S: int, N: int):
    for x in itertools.product(range(1, N + 1), repeat=S):
        if all(x[i] >= x[i + 1] for i in range(S - 1)):
            yield WarmupPlan(x)


def _stage_orders(stage: int, N: int):
    """All interleavings of the per-microbatch chains F -> B -> W on one stage."""
    slots = [OpKind.F, OpKind.B, OpKind.W]

    def rec(progress, acc):
        if all(p == 3 for p in progress):
            yield list(acc)
            return
        for j in range(N):
            if progress[j] < 3:
                acc.append(Operator(slots[progress[j]], stage, j + 1))
                progress[j] += 1
                yield from rec(progress, acc)
                progress[j] -= 1
                acc.pop()

    yield from rec([0] * N, [])


def semi_active_makespan(spec: PipelineSpec, order) -> int | None:
    """Left-shifted makespan (us) of a fixed per-stage order; None on deadlock.

    Written independently of the package engines.
    """
    S = spec.num_stages
    d = spec.durations_us()
    c = spec.latency_us()
    end = {}
    pos = [0] * S
    free = [0] * S
    moved = True
    while moved:
        moved = False
        for i in range(S):
            while pos[i] < len(order[i]):
                op = order[i][pos[i]]
                j = op.microbatch
                if op.kind is OpKind.F:
                    deps = [] if i == 0 else [(OpKind.F, i - 1, j, c[i - 1])]
                elif op.kind is OpKind.B:
                    deps = [(OpKind.F, i, j, 0)] + ([(OpKind.B, i + 1, j, c[i])] if i < S - 1 else [])
                else:
                    deps = [(OpKind.B, i, j, 0)]
                if any((k, s, m) not in end for k, s, m, _ in deps):
                    break
                ready = max([end[(k, s, m)] + lag for k, s, m, lag in deps], default=0)
                start = max(ready, free[i])
                free[i] = end[(op.kind, i, j)] = start + d[i][op.kind]
                pos[i] += 1
                moved = True
    if any(pos[i] < len(order[i]) for i in range(S)):
        return None
    return max(free)


def brute_force_optimum(spec: PipelineSpec) -> int:
    """Minimum makespan (us) over every combination of per-stage orders."""
    per_stage = [list(_stage_orders(i, spec.num_microbatches)) for i in range(spec.num_stages)]
    best = None
    for combo in itertools.product(*per_stage):
        m = semi_active_makespan(spec, combo)
        if m is not None and (best is None or m < best):
            best = m
    return best
