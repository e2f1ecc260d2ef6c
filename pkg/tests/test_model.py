import math

import pytest
from hypothesis import given, strategies as st

from slackpipe.model import (
    MemoryModel,
    Operator,
    OpKind,
    PipelineSpec,
    PlanError,
    ScheduledOp,
    SpecError,
    StageProfile,
    Timeline,
    WarmupPlan,
    bubble_rates,
    check_timeline,
    ensure_valid,
    ms_to_us,
    slackness_of,
    us_to_ms,
    validate_plan,
)
from slackpipe.scheduler import generate_schedule


def test_validate_plan_accepts_standard_plan():
    assert validate_plan(PipelineSpec.uniform(4, 12), WarmupPlan((7, 5, 3, 1))) == []


def test_validate_plan_allows_zero_slackness():
    assert validate_plan(PipelineSpec.uniform(2, 5), WarmupPlan((1, 1))) == []


def test_validate_plan_reports_monotonicity_violation():
    v = validate_plan(PipelineSpec.uniform(3, 10), WarmupPlan((2, 4, 1)))
    assert [(p.constraint, p.stages) for p in v] == [("monotone", (0, 1))]


def test_validate_plan_lists_every_violation():
    v = validate_plan(PipelineSpec.uniform(3, 4), WarmupPlan((5, 6, 0)))
    assert {p.constraint for p in v} == {"monotone", "last-stage", "microbatches"}


def test_validate_plan_length_mismatch():
    v = validate_plan(PipelineSpec.uniform(3, 4), WarmupPlan((2, 1)))
    assert v[0].constraint == "length"


def test_ensure_valid_raises():
    with pytest.raises(PlanError):
        ensure_valid(PipelineSpec.uniform(3, 10), WarmupPlan((2, 4, 1)))


@pytest.mark.parametrize("x, delta", [((7, 5, 3, 1), (2, 2, 2)), ((8, 5, 3, 1), (3, 2, 2)), ((1, 1), (0,))])
def test_slackness_examples(x, delta):
    assert slackness_of(WarmupPlan(x)).delta == delta


def test_slackness_rejects_non_monotone():
    with pytest.raises(PlanError):
        slackness_of(WarmupPlan((2, 4, 1)))


@given(st.lists(st.integers(1, 20), min_size=1, max_size=8))
def test_accepted_plans_have_nonnegative_slackness(values):
    x = tuple(sorted(values, reverse=True))
    spec = PipelineSpec.uniform(len(x), max(x))
    assert validate_plan(spec, WarmupPlan(x)) == []
    assert all(d >= 0 for d in slackness_of(WarmupPlan(x)).delta)


@given(st.lists(st.integers(0, 20), min_size=2, max_size=8))
def test_validate_plan_agrees_with_definition(x):
    spec = PipelineSpec.uniform(len(x), 10)
    ok = x[-1] >= 1 and all(a >= b for a, b in zip(x, x[1:])) and x[0] <= 10
    assert (validate_plan(spec, WarmupPlan(x)) == []) == ok


@pytest.mark.parametrize("kw", [
    dict(t_f=0, t_b=1), dict(t_f=1, t_b=-1), dict(t_f=1, t_b=1, t_w=-1), dict(t_f=math.inf, t_b=1),
])
def test_stage_profile_rejects_bad_durations(kw):
    with pytest.raises(SpecError):
        StageProfile(0, **kw)


def test_pipeline_spec_validation():
    p = [StageProfile(0, 1, 1), StageProfile(1, 1, 1)]
    with pytest.raises(SpecError):
        PipelineSpec(2, 4, p, [])
    with pytest.raises(SpecError):
        PipelineSpec(2, 4, p, [math.inf])
    with pytest.raises(SpecError):
        PipelineSpec(2, 4, p, [-1])
    with pytest.raises(SpecError):
        PipelineSpec(2, 0, p, [0])
    with pytest.raises(SpecError):
        PipelineSpec(3, 4, p, [0, 0])


def test_memory_model_validation():
    with pytest.raises(SpecError):
        MemoryModel(0.5, 1)
    with pytest.raises(SpecError):
        MemoryModel(1, 0)


def test_time_conversion():
    assert ms_to_us(10) == 10_000
    assert ms_to_us(0.0015) == 2
    assert us_to_ms(390_000) == 390 and isinstance(us_to_ms(390_000), int)
    assert us_to_ms(1500) == 1.5


def _tl(spec, plan):
    return generate_schedule(spec, plan)


def test_check_timeline_accepts_generated():
    spec = PipelineSpec.uniform(3, 6, 10, [5, 0])
    assert check_timeline(spec, _tl(spec, WarmupPlan((5, 3, 1)))) == []


def test_check_timeline_detects_overlap_and_duplicates():
    spec = PipelineSpec.uniform(1, 1)
    f = Operator(OpKind.F, 0, 1)
    tl = Timeline(((ScheduledOp(f, 0, 10_000), ScheduledOp(f, 5_000, 15_000)),))
    errors = check_timeline(spec, tl)
    assert any("twice" in e for e in errors)
    assert any("overlaps" in e for e in errors)


def test_check_timeline_detects_early_start():
    spec = PipelineSpec.uniform(2, 1, 10, [5])
    tl = _tl(spec, WarmupPlan((1, 1)))
    ops = list(tl.per_stage[1])
    s = ops[0]
    ops[0] = ScheduledOp(s.op, s.start_us - 1000, s.end_us - 1000)
    bad = Timeline((tl.per_stage[0], tuple(ops)))
    assert any("before ready" in e for e in check_timeline(spec, bad))


def test_timeline_derived_fields():
    spec = PipelineSpec.uniform(4, 12)
    tl = _tl(spec, WarmupPlan((7, 5, 3, 1)))
    assert tl.makespan_us == max(s.end_us for ops in tl.per_stage for s in ops)
    assert tl.warmup_counts() == [7, 5, 3, 1]


@given(st.integers(1, 4), st.integers(1, 6), st.integers(0, 20))
def test_bubble_rates_in_unit_interval(S, N, c):
    spec = PipelineSpec.uniform(S, N, 10, [c] * (S - 1))
    x = tuple(min(N, S - i) for i in range(S))
    interior, util = bubble_rates(_tl(spec, WarmupPlan(x)))
    assert 0 <= interior <= 1 and 0 <= util <= 1


def test_bubble_rates_by_hand():
    a = Operator(OpKind.F, 0, 1)
    b = Operator(OpKind.F, 1, 1)
    tl = Timeline(((ScheduledOp(a, 0, 10), ScheduledOp(b, 20, 30)), (ScheduledOp(b, 0, 40),)))
    interior, util = bubble_rates(tl)
    assert interior == pytest.approx(10 / 70)
    assert util == pytest.approx(1 - 60 / 80)
