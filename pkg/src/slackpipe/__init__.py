"""Slackness-aware pipeline-parallel schedule planning, generation and replay."""

from .analysis import DelayRegime, Regime, absorption_holds, classify_delay, total_estimate
from .executor import Decoupled, SequentialLaunch, accumulated_delay, peak_activations, replay
from .model import (
    MemoryModel,
    Operator,
    OpKind,
    PipelineSpec,
    StageProfile,
    Timeline,
    WarmupPlan,
    slackness_of,
    validate_plan,
)
from .planner import adapt_warmup, init_warmup
from .scheduler import GenConfig, generate_schedule, select_op, step_count

__all__ = [
    "DelayRegime", "Regime", "absorption_holds", "classify_delay", "total_estimate",
    "Decoupled", "SequentialLaunch", "accumulated_delay", "peak_activations", "replay",
    "MemoryModel", "Operator", "OpKind", "PipelineSpec", "StageProfile", "Timeline", "WarmupPlan",
    "slackness_of", "validate_plan", "adapt_warmup", "init_warmup",
    "GenConfig", "generate_schedule", "select_op", "step_count",
]
