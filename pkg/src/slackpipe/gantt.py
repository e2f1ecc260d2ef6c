"""Hand-emitted SVG Gantt chart: one lane per stage, one rectangle per operator."""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

from .model import OpKind, Timeline

COLORS = {OpKind.F: "#4a90e2", OpKind.B: "#7ed321", OpKind.W: "#f5a623"}


@dataclass(frozen=True)
class GanttStyle:
    px_per_ms: float = 2.0
    lane_height: int = 28
    lane_gap: int = 6
    margin_left: int = 70
    margin_top: int = 30
    margin_right: int = 20
    margin_bottom: int = 40
    tick_ms: float = 50
    show_labels: bool = True
    title: str = ""


def _num(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return s if s not in ("", "-0") else "0"


def lane_y(style: GanttStyle, stage: int) -> float:
    return style.margin_top + stage * (style.lane_height + style.lane_gap)


def render_gantt(timeline: Timeline, style: GanttStyle = GanttStyle()) -> str:
    S = timeline.num_stages
    span_ms = timeline.makespan_us / 1000
    plot_w = span_ms * style.px_per_ms
    width = style.margin_left + plot_w + style.margin_right
    height = lane_y(style, S) + style.margin_bottom
    x0 = style.margin_left

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(width)} {_num(height)}" font-family="sans-serif" font-size="10">',
        f'<rect x="0" y="0" width="{_num(width)}" height="{_num(height)}" fill="#ffffff"/>',
    ]
    if style.title:
        out.append(f'<text x="{x0}" y="14" font-size="12">{escape(style.title)}</text>')

    for i, ops in enumerate(timeline.per_stage):
        y = lane_y(style, i)
        out.append(f'<g class="lane" data-stage="{i}">')
        out.append(
            f'<rect class="lane-bg" x="{_num(x0)}" y="{_num(y)}" width="{_num(plot_w)}" '
            f'height="{style.lane_height}" fill="#f2f2f2"/>'
        )
        out.append(f'<text x="{x0 - 8}" y="{_num(y + style.lane_height / 2 + 4)}" text-anchor="end">S{i}</text>')
        for s in ops:
            if s.duration_us == 0:
                continue
            x = x0 + s.start_us / 1000 * style.px_per_ms
            w = s.duration_us / 1000 * style.px_per_ms
            label = f"{s.op.kind.value}{s.op.microbatch}"
            out.append(
                f'<rect class="op" data-kind="{s.op.kind.value}" data-mb="{s.op.microbatch}" '
                f'x="{_num(x)}" y="{_num(y)}" width="{_num(w)}" height="{style.lane_height}" '
                f'fill="{COLORS[s.op.kind]}" stroke="#333333" stroke-width="0.5">'
                f"<title>{label} [{_num(s.start_us / 1000)}, {_num(s.end_us / 1000)}] ms</title></rect>"
            )
            if style.show_labels and w >= 14:
                out.append(
                    f'<text x="{_num(x + w / 2)}" y="{_num(y + style.lane_height / 2 + 4)}" '
                    f'text-anchor="middle">{label}</text>'
                )
        out.append("</g>")

    axis_y = lane_y(style, S) + 4
    out.append(f'<line x1="{_num(x0)}" y1="{_num(axis_y)}" x2="{_num(x0 + plot_w)}" y2="{_num(axis_y)}" stroke="#000000"/>')
    if style.tick_ms > 0:
        n = int(span_ms // style.tick_ms)
        for k in range(n + 1):
            tx = x0 + k * style.tick_ms * style.px_per_ms
            out.append(f'<line x1="{_num(tx)}" y1="{_num(axis_y)}" x2="{_num(tx)}" y2="{_num(axis_y + 4)}" stroke="#000000"/>')
            out.append(f'<text x="{_num(tx)}" y="{_num(axis_y + 16)}" text-anchor="middle">{_num(k * style.tick_ms)}</text>')
    out.append(f'<text x="{_num(x0 + plot_w)}" y="{_num(axis_y + 30)}" text-anchor="end">T = {_num(span_ms)} ms</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
