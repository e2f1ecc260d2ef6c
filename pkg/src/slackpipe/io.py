"""JSON documents for specs, plans, timelines, traces and campaign configs/results."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any

from .campaign import FAILURE, CampaignConfig, CampaignResult, Policy, StragglerEvent
from .model import (
    MemoryModel,
    Operator,
    OpKind,
    PipelineSpec,
    ScheduledOp,
    SpecError,
    StageProfile,
    Timeline,
    WarmupPlan,
    ms_to_us,
    us_to_ms,
)
from .scheduler import GenConfig


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2) + "\n"


def load_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _require(doc: dict, key: str, what: str):
    if key not in doc:
        raise SpecError(f"{what}: missing field {key!r}")
    return doc[key]


def spec_to_json(spec: PipelineSpec) -> dict:
    return {
        "num_stages": spec.num_stages,
        "num_microbatches": spec.num_microbatches,
        "profiles": [
            {"stage_index": p.stage_index, "t_f": p.t_f, "t_b": p.t_b, "t_w": p.t_w} for p in spec.profiles
        ],
        "comm_latency": list(spec.comm_latency),
    }


def spec_from_json(doc: dict) -> PipelineSpec:
    profiles = tuple(
        StageProfile(
            _require(p, "stage_index", "profile"),
            _require(p, "t_f", "profile"),
            _require(p, "t_b", "profile"),
            p.get("t_w", 0),
        )
        for p in _require(doc, "profiles", "spec")
    )
    return PipelineSpec(
        _require(doc, "num_stages", "spec"),
        _require(doc, "num_microbatches", "spec"),
        profiles,
        tuple(doc.get("comm_latency", ())),
    )


def plan_to_json(plan: WarmupPlan) -> dict:
    return {"x": list(plan.x)}


def plan_from_json(doc: dict) -> WarmupPlan:
    return WarmupPlan(tuple(_require(doc, "x", "plan")))


def timeline_to_json(tl: Timeline) -> dict:
    return {
        "makespan_ms": us_to_ms(tl.makespan_us),
        "stages": [
            [
                {
                    "kind": s.op.kind.value,
                    "mb": s.op.microbatch,
                    "start_ms": us_to_ms(s.start_us),
                    "end_ms": us_to_ms(s.end_us),
                }
                for s in ops
            ]
            for ops in tl.per_stage
        ],
    }


def timeline_from_json(doc: dict) -> Timeline:
    stages = []
    for i, ops in enumerate(_require(doc, "stages", "timeline")):
        stages.append(tuple(
            ScheduledOp(Operator(OpKind(o["kind"]), i, o["mb"]), ms_to_us(o["start_ms"]), ms_to_us(o["end_ms"]))
            for o in ops
        ))
    return Timeline(tuple(stages))


def profiles_from_timeline(tl: Timeline) -> tuple[StageProfile, ...]:
    """Recover per-stage F/B/W durations from the ops of a timeline."""
    out = []
    for i, ops in enumerate(tl.per_stage):
        d = {}
        for s in ops:
            prev = d.setdefault(s.op.kind, s.duration_us)
            if prev != s.duration_us:
                raise SpecError(f"stage {i}: inconsistent {s.op.kind.value} durations in timeline")
        if set(d) != set(OpKind):
            raise SpecError(f"stage {i}: timeline lacks some operator kinds")
        out.append(StageProfile(i, us_to_ms(d[OpKind.F]), us_to_ms(d[OpKind.B]), us_to_ms(d[OpKind.W])))
    return tuple(out)


def event_to_json(ev: StragglerEvent) -> dict:
    return {
        "from": ev.iter_from,
        "to": ev.iter_to,
        "links": sorted(ev.links),
        "latency_ms": "failure" if ev.is_failure else ev.latency_ms,
    }


def event_from_json(doc: dict) -> StragglerEvent:
    lat = _require(doc, "latency_ms", "event")
    if lat == "failure":
        lat = FAILURE
    elif isinstance(lat, str):
        raise SpecError(f"event latency must be a number or 'failure', got {lat!r}")
    start = _require(doc, "from", "event")
    return StragglerEvent(start, doc.get("to", start), frozenset(_require(doc, "links", "event")), lat)


def trace_to_json(trace) -> list:
    return [event_to_json(ev) for ev in trace]


def trace_from_json(doc: list) -> list[StragglerEvent]:
    if not isinstance(doc, list):
        raise SpecError("trace must be a JSON array of events")
    return [event_from_json(d) for d in doc]


def bundled_trace() -> list[StragglerEvent]:
    """The nine-straggler, one-failure 1,200-iteration trace shipped with the package."""
    text = resources.files("slackpipe.data").joinpath("straggler_trace.json").read_text(encoding="utf-8")
    return trace_from_json(json.loads(text))


def bundled_campaign() -> CampaignConfig:
    text = resources.files("slackpipe.data").joinpath("campaign.json").read_text(encoding="utf-8")
    return campaign_from_json(json.loads(text))


def campaign_to_json(cfg: CampaignConfig) -> dict:
    doc = {
        "total_iters": cfg.total_iters,
        "base_spec": spec_to_json(cfg.base_spec),
        "policy": cfg.policy.value,
        "restart_penalty_ms": cfg.restart_penalty_ms,
        "failure_fallback_latency_ms": cfg.failure_fallback_latency_ms,
        "replan_lag_iters": cfg.replan_lag_iters,
        "queue_capacity": cfg.queue_capacity,
    }
    if cfg.memory is not None:
        doc["memory"] = {"capacity": cfg.memory.capacity, "per_activation": cfg.memory.per_activation}
    if cfg.gen.step_us is not None:
        doc["delta_us"] = cfg.gen.step_us
    return doc


def campaign_from_json(doc: dict) -> CampaignConfig:
    mem = doc.get("memory")
    return CampaignConfig(
        total_iters=_require(doc, "total_iters", "campaign"),
        base_spec=spec_from_json(_require(doc, "base_spec", "campaign")),
        policy=Policy(_require(doc, "policy", "campaign")),
        restart_penalty_ms=_require(doc, "restart_penalty_ms", "campaign"),
        failure_fallback_latency_ms=doc.get("failure_fallback_latency_ms", 0.0),
        replan_lag_iters=doc.get("replan_lag_iters", 0),
        queue_capacity=doc.get("queue_capacity", 1),
        memory=MemoryModel(mem["capacity"], mem["per_activation"]) if mem else None,
        gen=GenConfig(doc.get("delta_us")),
    )


def campaign_result_to_json(res: CampaignResult) -> dict:
    return {
        "policy": res.policy.value,
        "total_time_ms": res.total_time_ms,
        "restarts": res.restarts,
        "throughput_mb_per_s": round(res.throughput_mb_per_s, 6),
        "iterations": [
            {
                "iter": r.iteration,
                "c_ms": list(r.c_vector),
                "plan": list(r.plan),
                "iter_time_ms": r.iter_time_ms,
                "penalty_ms": r.penalty_ms,
                "cumulative_ms": r.cumulative_ms,
            }
            for r in res.iterations
        ],
    }
