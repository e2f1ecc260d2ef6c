import re

from conftest import IDEAL_PLAN, ideal_spec
from slackpipe.executor import replay_timeline
from slackpipe.gantt import GanttStyle, render_gantt
from slackpipe.model import PipelineSpec, WarmupPlan
from slackpipe.scheduler import GenConfig, generate_schedule

MS = GenConfig(1000)


def _rects(svg):
    return re.findall(r'<rect class="op"[^>]*? x="([\d.]+)"[^>]*? width="([\d.]+)"', svg)


def test_ideal_chart():
    svg = render_gantt(generate_schedule(ideal_spec(), IDEAL_PLAN, MS))
    assert svg.count('class="lane"') == 4
    rects = _rects(svg)
    assert len(rects) == 4 * 36
    style = GanttStyle()
    right = max(float(x) + float(w) for x, w in rects)
    assert right == style.margin_left + 390 * style.px_per_ms
    assert "T = 390 ms" in svg


def test_single_stage_single_microbatch():
    svg = render_gantt(generate_schedule(PipelineSpec.uniform(1, 1), WarmupPlan((1,)), MS))
    assert svg.count('class="lane"') == 1
    assert len(_rects(svg)) == 3


def test_zero_width_ops_skipped():
    spec = PipelineSpec.uniform(1, 2, t_w=0)
    svg = render_gantt(generate_schedule(spec, WarmupPlan((1,)), MS))
    assert 'data-kind="W"' not in svg
    assert len(_rects(svg)) == 4


def test_delayed_chart_shows_gaps():
    order = generate_schedule(ideal_spec(), IDEAL_PLAN, MS).order()
    tl = replay_timeline(ideal_spec((20, 0, 0)), order)
    svg = render_gantt(tl)
    lane1 = svg.split('data-stage="1"')[1].split("</g>")[0]
    spans = sorted((float(x), float(x) + float(w)) for x, w in _rects(lane1))
    assert any(b[0] > a[1] for a, b in zip(spans, spans[1:]))


def test_deterministic_and_scaled():
    tl = generate_schedule(ideal_spec(), IDEAL_PLAN, MS)
    assert render_gantt(tl) == render_gantt(tl)
    wide = render_gantt(tl, GanttStyle(px_per_ms=4, title="a < b"))
    assert "a &lt; b" in wide
    assert max(float(x) + float(w) for x, w in _rects(wide)) == 70 + 390 * 4
