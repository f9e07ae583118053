"""Agent-based Plan-Do-Check-Act adaptation engine."""

from .actors import AgentRuntime
from .bus import EventBus
from .messages import (
    AdaptationRecord,
    AdaptionGoal,
    CandidateEvaluation,
    TriggerEvent,
    normalize_weights,
)
from .pdca import AdaptationEngine, CycleContext, EngineConfig, score_candidates

__all__ = [
    "AgentRuntime",
    "EventBus",
    "AdaptationRecord",
    "AdaptionGoal",
    "CandidateEvaluation",
    "TriggerEvent",
    "normalize_weights",
    "AdaptationEngine",
    "CycleContext",
    "EngineConfig",
    "score_candidates",
]
