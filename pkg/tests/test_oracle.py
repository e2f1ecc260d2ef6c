import itertools
import random
import warnings

import pytest

from conftest import _stage_orders, all_plans, brute_force_optimum, random_small_instance, semi_active_makespan
from slackpipe.executor import replay_timeline
from slackpipe.model import OpKind, PipelineSpec, StageProfile, WarmupPlan, check_timeline
from slackpipe.oracle import InfeasiblePlan, InstanceTooLarge, optimal_makespan
from slackpipe.scheduler import generate_schedule


def test_two_stage_two_microbatch():
    spec = PipelineSpec.uniform(2, 2, 10, [0])
    assert optimal_makespan(spec).makespan_ms == brute_force_optimum(spec) // 1000 == 70


def test_single_stage_serial():
    assert optimal_makespan(PipelineSpec.uniform(1, 2)).makespan_ms == 60


def test_regression_fixture_with_latency():
    spec = PipelineSpec.uniform(2, 2, 10, [10])
    assert optimal_makespan(spec).makespan_ms == 90


def test_matches_unrestricted_enumeration():
    rng = random.Random(3)
    for _ in range(12):
        S = rng.choice([1, 2, 3])
        prof = [StageProfile(i, rng.randint(5, 20), rng.randint(5, 20), rng.randint(0, 20)) for i in range(S)]
        spec = PipelineSpec(S, 2, prof, [rng.randint(0, 15) for _ in range(S - 1)])
        assert optimal_makespan(spec).makespan_us == brute_force_optimum(spec)


def test_single_stage_three_microbatches_enumerated():
    spec = PipelineSpec(1, 3, [StageProfile(0, 7, 11, 5)], [])
    best = min(semi_active_makespan(spec, [o]) for o in _stage_orders(0, 3))
    assert optimal_makespan(spec).makespan_us == best


def _constrained_brute_force(spec, x):
    per_stage = []
    for i in range(spec.num_stages):
        keep = []
        for o in _stage_orders(i, spec.num_microbatches):
            k = next(n for n, op in enumerate(o) if op.kind is not OpKind.F)
            if k == x[i]:
                keep.append(o)
        per_stage.append(keep)
    vals = [semi_active_makespan(spec, combo) for combo in itertools.product(*per_stage)]
    vals = [v for v in vals if v is not None]
    return min(vals) if vals else None


def test_plan_constraint_matches_enumeration():
    spec = PipelineSpec(2, 2, [StageProfile(0, 10, 15, 5), StageProfile(1, 8, 12, 9)], [6])
    for plan in all_plans(2, 2):
        res = optimal_makespan(spec, plan)
        assert res.makespan_us == _constrained_brute_force(spec, plan.x)


def test_infeasible_plan_constraint():
    spec = PipelineSpec.uniform(2, 2)
    with pytest.raises(InfeasiblePlan):
        optimal_makespan(spec, WarmupPlan((1, 2)))
    with pytest.raises(InfeasiblePlan):
        optimal_makespan(spec, WarmupPlan((3, 1)))


def test_size_guard():
    with pytest.raises(InstanceTooLarge):
        optimal_makespan(PipelineSpec.uniform(4, 2))
    with pytest.raises(InstanceTooLarge):
        optimal_makespan(PipelineSpec.uniform(2, 6))


def test_witness_replays_and_bounds():
    rng = random.Random(17)
    for _ in range(15):
        spec = random_small_instance(rng)
        res = optimal_makespan(spec)
        tl = replay_timeline(spec, [list(o) for o in res.order])
        assert tl.makespan_us == res.makespan_us
        assert check_timeline(spec, tl) == []
        dur = spec.durations_us()
        c = spec.latency_us()
        work = max(spec.num_microbatches * sum(d.values()) for d in dur)
        path = sum(d[OpKind.F] + d[OpKind.B] for d in dur) + 2 * sum(c) + dur[0][OpKind.W]
        assert res.makespan_us >= max(work, path)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for plan in all_plans(spec.num_stages, spec.num_microbatches):
                assert res.makespan_us <= generate_schedule(spec, plan).makespan_us
