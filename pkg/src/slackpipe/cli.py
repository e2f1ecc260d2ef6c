"""Command-line frontend.

Exit codes: 0 success, 1 domain error (invalid plan, deadlock, oversized
oracle instance, bad input file), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from dataclasses import replace
from typing import Sequence

from . import io
from .analysis import classify_all, total_estimate
from .campaign import Policy, run_campaign
from .executor import Decoupled, compute_metrics, parse_comm, replay_timeline
from .gantt import GanttStyle, render_gantt
from .model import MemoryModel, PipelineSpec, SlackpipeError, SpecError, ms_to_us, us_to_ms
from .oracle import optimal_makespan
from .planner import adapt_for, init_warmup
from .scheduler import GenConfig, generate_schedule


def _emit(text: str, out: str | None) -> None:
    if out:
        io.write_text(out, text)
    else:
        sys.stdout.write(text)


def parse_delays(text: str, num_links: int) -> dict[int, float]:
    """``"0:10,2:5"`` -> {0: 10.0, 2: 5.0}."""
    delays = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        link, sep, value = part.partition(":")
        if not sep:
            raise SpecError(f"bad delay {part!r}; expected LINK:MS")
        i = int(link)
        if not 0 <= i < num_links:
            raise SpecError(f"delay link {i} out of range 0..{num_links - 1}")
        delays[i] = float(value) if "." in value else int(value)
    return delays


def _metrics_json(metrics) -> dict:
    return {
        "makespan_ms": metrics.makespan_ms,
        "accumulated_delay_ms": metrics.accumulated_delay_ms,
        "interior_bubble_rate": round(metrics.interior_bubble_rate, 6),
        "utilization_bubble_rate": round(metrics.utilization_bubble_rate, 6),
        "peak_activations": list(metrics.peak_activations),
    }


def cmd_plan(args) -> int:
    if args.plan_cmd == "init":
        plan = init_warmup(args.stages, MemoryModel(args.mem_capacity, args.mem_per_activation))
    else:
        plan = adapt_for(io.spec_from_json(io.load_json(args.spec)))
    _emit(io.dumps(io.plan_to_json(plan)), args.out)
    return 0


def cmd_schedule(args) -> int:
    spec = io.spec_from_json(io.load_json(args.spec))
    plan = io.plan_from_json(io.load_json(args.plan))
    tl = generate_schedule(spec, plan, GenConfig(args.delta_us))
    _emit(io.dumps(io.timeline_to_json(tl)), args.out)
    return 0


def _timeline_spec(args, tl) -> PipelineSpec:
    if args.spec:
        spec = io.spec_from_json(io.load_json(args.spec))
    else:
        n = len(tl.per_stage[0]) // 3 if tl.per_stage else 0
        S = tl.num_stages
        spec = PipelineSpec(S, n, io.profiles_from_timeline(tl), (0,) * (S - 1))
    return spec


def cmd_simulate(args) -> int:
    tl = io.timeline_from_json(io.load_json(args.timeline))
    spec = _timeline_spec(args, tl)
    c = list(spec.comm_latency)
    for link, v in parse_delays(args.delays, spec.num_stages - 1).items():
        c[link] = v
    comm = parse_comm(args.comm)
    order = tl.order()
    delayed = replay_timeline(spec.with_latency(c), order, comm)
    base = replay_timeline(spec.with_latency([0] * len(c)), order, comm)
    metrics = compute_metrics(delayed, base.makespan_us)
    if args.out:
        io.write_text(args.out, io.dumps(io.timeline_to_json(delayed)))
    _emit(io.dumps(_metrics_json(metrics)), args.metrics_out)
    return 0


def _c_values_us(c_from: float, c_to: float, c_step: float) -> list[int]:
    a, b, d = ms_to_us(c_from), ms_to_us(c_to), ms_to_us(c_step)
    if d <= 0 or b < a:
        raise SpecError("sweep needs c-step > 0 and c-to >= c-from")
    return list(range(a, b + 1, d))


def cmd_sweep(args) -> int:
    spec = io.spec_from_json(io.load_json(args.spec))
    plan = io.plan_from_json(io.load_json(args.plan))
    if not 0 <= args.link < spec.num_stages - 1:
        raise SpecError(f"link {args.link} out of range")
    comm = parse_comm(args.comm)
    order = generate_schedule(spec, plan, GenConfig(args.delta_us)).order()
    zero = replay_timeline(spec.with_latency([0] * (spec.num_stages - 1)), order, comm).makespan_us
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["c_ms", "makespan_ms", "accumulated_delay_ms", "interior_bubble_rate", "utilization_bubble_rate"])
    for cu in _c_values_us(args.c_from, args.c_to, args.c_step):
        c = list(spec.comm_latency)
        c[args.link] = us_to_ms(cu)
        m = compute_metrics(replay_timeline(spec.with_latency(c), order, comm), zero)
        w.writerow([us_to_ms(cu), m.makespan_ms, m.accumulated_delay_ms,
                    f"{m.interior_bubble_rate:.6f}", f"{m.utilization_bubble_rate:.6f}"])
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_analyze(args) -> int:
    spec = io.spec_from_json(io.load_json(args.spec))
    plan = io.plan_from_json(io.load_json(args.plan))
    rows = classify_all(spec, plan)
    if args.format == "json":
        doc = {
            "links": [
                {"link": r.link, "regime": r.variant.value, "threshold_ms": r.threshold_ms, "estimate_ms": r.estimate_ms}
                for r in rows
            ],
            "total_estimate_ms": total_estimate(spec, plan),
        }
        _emit(io.dumps(doc), args.out)
        return 0
    lines = [f"{'link':>4}  {'c_ms':>8}  {'regime':<9}  {'threshold_ms':>12}  {'estimate_ms':>11}"]
    for r in rows:
        lines.append(
            f"{r.link:>4}  {spec.comm_latency[r.link]:>8g}  {r.variant.value:<9}  "
            f"{r.threshold_ms:>12g}  {r.estimate_ms:>11g}"
        )
    lines.append(f"total estimate: {total_estimate(spec, plan):g} ms")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_oracle(args) -> int:
    spec = io.spec_from_json(io.load_json(args.spec))
    plan = io.plan_from_json(io.load_json(args.plan)) if args.plan else None
    res = optimal_makespan(spec, plan)
    doc = {
        "makespan_ms": res.makespan_ms,
        "order": [[f"{op.kind.value}{op.microbatch}" for op in ops] for ops in res.order],
    }
    _emit(io.dumps(doc), args.out)
    return 0


def cmd_replay_trace(args) -> int:
    cfg = io.campaign_from_json(io.load_json(args.config))
    if args.policy:
        cfg = replace(cfg, policy=Policy(args.policy))
    trace = io.trace_from_json(io.load_json(args.trace))
    res = run_campaign(cfg, trace)
    _emit(io.dumps(io.campaign_result_to_json(res)), args.out)
    if args.csv:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "c_vector", "policy", "iter_time_ms", "cumulative_ms"])
        for r in res.iterations:
            w.writerow([r.iteration, ";".join(f"{v:g}" for v in r.c_vector), res.policy.value,
                        r.iter_time_ms, r.cumulative_ms])
        io.write_text(args.csv, buf.getvalue())
    return 0


def cmd_gantt(args) -> int:
    tl = io.timeline_from_json(io.load_json(args.timeline))
    style = GanttStyle(px_per_ms=args.px_per_ms, title=args.title or "")
    _emit(render_gantt(tl, style), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slackpipe", description="Straggler-resilient pipeline schedule tools")
    sub = p.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="compute warm-up forward counts")
    psub = plan.add_subparsers(dest="plan_cmd", required=True)
    pi = psub.add_parser("init", help="memory-bounded initial plan")
    pi.add_argument("--stages", type=int, required=True)
    pi.add_argument("--mem-capacity", type=float, required=True)
    pi.add_argument("--mem-per-activation", type=float, required=True)
    pi.add_argument("--out")
    pa = psub.add_parser("adapt", help="delay-aware plan for the spec's latencies")
    pa.add_argument("--spec", required=True)
    pa.add_argument("--out")
    plan.set_defaults(func=cmd_plan)

    s = sub.add_parser("schedule", help="generate a full pipeline timeline")
    s.add_argument("--spec", required=True)
    s.add_argument("--plan", required=True)
    s.add_argument("--delta-us", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_schedule)

    sim = sub.add_parser("simulate", help="replay a timeline's order under injected delays")
    sim.add_argument("--timeline", required=True)
    sim.add_argument("--spec", help="durations/base latencies; defaults to those implied by the timeline")
    sim.add_argument("--delays", default="", help='per-link latencies, e.g. "0:10,2:5"')
    sim.add_argument("--comm", default="decoupled", help="decoupled | seq:K")
    sim.add_argument("--metrics-out")
    sim.add_argument("--out", help="write the replayed timeline here")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="latency sweep on one link, CSV output")
    sw.add_argument("--spec", required=True)
    sw.add_argument("--plan", required=True)
    sw.add_argument("--link", type=int, required=True)
    sw.add_argument("--c-from", type=float, required=True)
    sw.add_argument("--c-to", type=float, required=True)
    sw.add_argument("--c-step", type=float, required=True)
    sw.add_argument("--comm", default="decoupled")
    sw.add_argument("--delta-us", type=int)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)

    an = sub.add_parser("analyze", help="per-link delay regime, threshold and estimate")
    an.add_argument("--spec", required=True)
    an.add_argument("--plan", required=True)
    an.add_argument("--format", choices=["table", "json"], default="table")
    an.add_argument("--out")
    an.set_defaults(func=cmd_analyze)

    orc = sub.add_parser("oracle", help="exact minimum makespan for tiny instances")
    orc.add_argument("--spec", required=True)
    orc.add_argument("--plan")
    orc.add_argument("--out")
    orc.set_defaults(func=cmd_oracle)

    rt = sub.add_parser("replay-trace", help="run a straggler-trace campaign")
    rt.add_argument("--config", required=True)
    rt.add_argument("--trace", required=True)
    rt.add_argument("--policy", choices=[p.value for p in Policy])
    rt.add_argument("--out")
    rt.add_argument("--csv")
    rt.set_defaults(func=cmd_replay_trace)

    g = sub.add_parser("gantt", help="render a timeline as SVG")
    g.add_argument("--timeline", required=True)
    g.add_argument("--px-per-ms", type=float, default=2.0)
    g.add_argument("--title")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gantt)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SlackpipeError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"slackpipe {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
