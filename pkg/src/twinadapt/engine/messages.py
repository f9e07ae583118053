"""Immutable message and record types exchanged between the PDCA agents."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from ..fitting import FitResult
from ..monitor import DeviationReport
from ..pool import ModelConfiguration, RequirementSpec
from ..signals import SimTrace

TRIGGER_NEW_APPLICATION = "new_application"
TRIGGER_REQUIREMENT_CHANGE = "requirement_change"
TRIGGER_ASSET_DEVIATION = "asset_deviation"

OUTCOME_ADAPTED = "adapted"
OUTCOME_NO_ADAPTATION = "no_adaptation_needed"
OUTCOME_FAILED = "failed"

FAILURE_NO_ADEQUATE = "NoAdequateConfiguration"


def normalize_weights(weights) -> tuple[float, float, float]:
    """Scale nonnegative (time, cost, quality) weights to sum 1."""
    wt, wc, wq = (float(w) for w in weights)
    if wt < 0 or wc < 0 or wq < 0:
        raise ValueError("weights must be nonnegative")
    total = wt + wc + wq
    if total <= 0:
        raise ValueError("weights must not all be zero")
    return (wt / total, wc / total, wq / total)


@dataclass(frozen=True)
class TriggerEvent:
    """One of the three adaptation triggers."""

    kind: str
    app_id: str | None = None
    requirement: RequirementSpec | None = None
    report: DeviationReport | None = None
    measured: SimTrace | None = None
    stimulus: SimTrace | None = None
    received_at: float = field(default_factory=time.time, compare=False)

    def coalesce_key(self) -> tuple:
        """Triggers with equal keys queued back-to-back collapse into one."""
        window = self.report.window if self.report else None
        return (self.kind, self.app_id, window)

    def to_json_obj(self) -> dict:
        obj: dict = {"kind": self.kind}
        if self.app_id is not None:
            obj["app_id"] = self.app_id
        if self.requirement is not None:
            obj["requirement"] = {
                "app_id": self.requirement.app_id,
                "phenomena": {
                    tag: depth for tag, depth in sorted(self.requirement.required_phenomena.items())
                },
            }
        if self.report is not None:
            obj["report"] = self.report.to_json_obj()
        return obj


@dataclass(frozen=True)
class AdaptionGoal:
    """Required phenomena, per-slot depth directives, magic-triangle weights."""

    requirement: RequirementSpec
    depth_directives: dict[str, str]
    weights: tuple[float, float, float]  # (w_time, w_cost, w_quality)

    def __post_init__(self):
        wt, wc, wq = self.weights
        if wt < 0 or wc < 0 or wq < 0:
            raise ValueError("weights must be nonnegative")
        if abs((wt + wc + wq) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")

    def to_json_obj(self) -> dict:
        return {
            "app_id": self.requirement.app_id,
            "depth_directives": dict(sorted(self.depth_directives.items())),
            "weights": {
                "time": self.weights[0],
                "cost": self.weights[1],
                "quality": self.weights[2],
            },
        }


@dataclass
class CandidateEvaluation:
    """Magic-triangle metrics of one candidate on the recorded window."""

    config: ModelConfiguration
    deviation: float = 0.0  # D, quality raw metric
    eval_time: float = 0.0  # T, deterministic compute model
    cost: float = 0.0  # C, abstract cost units
    norm_deviation: float = 0.0
    norm_time: float = 0.0
    norm_cost: float = 0.0
    score: float = 0.0
    adequate: bool = False
    total_depth: int = 0
    fit: FitResult | None = None
    failed: bool = False
    error: str | None = None

    def to_json_obj(self) -> dict:
        obj = {
            "config_id": self.config.id,
            "config": self.config.to_json_obj(),
            "metrics": {"D": self.deviation, "T": self.eval_time, "C": self.cost},
            "normalized": {
                "D": self.norm_deviation,
                "T": self.norm_time,
                "C": self.norm_cost,
            },
            "score": self.score,
            "adequate": self.adequate,
            "total_depth": self.total_depth,
            "failed": self.failed,
        }
        if self.fit is not None:
            obj["fit"] = self.fit.to_json_obj()
        if self.error is not None:
            obj["error"] = self.error
        return obj


@dataclass
class AdaptationRecord:
    """Full audit of one adaptation cycle.

    All wall-clock measurements are segregated into ``timing`` so that the
    rest of the record is byte-for-byte reproducible.
    """

    cycle_id: str
    trigger: TriggerEvent
    goal: AdaptionGoal | None = None
    outcome: str = OUTCOME_FAILED
    stage1_fit: FitResult | None = None
    stage1_bypassed: str | None = None
    stage2_batches: list[list[CandidateEvaluation]] = field(default_factory=list)
    ranked: list[CandidateEvaluation] = field(default_factory=list)
    selected_config_id: str | None = None
    failure_reason: str | None = None
    rounds: int = 0
    diagnosis: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def to_json_obj(self, include_timing: bool = True) -> dict:
        obj: dict = {
            "cycle_id": self.cycle_id,
            "trigger": self.trigger.to_json_obj(),
            "goal": self.goal.to_json_obj() if self.goal else None,
            "outcome": self.outcome,
            "stage1": {
                "bypassed": self.stage1_bypassed,
                "fit": self.stage1_fit.to_json_obj() if self.stage1_fit else None,
            },
            "stage2_batches": [
                [e.to_json_obj() for e in batch] for batch in self.stage2_batches
            ],
            "ranked": [e.to_json_obj() for e in self.ranked],
            "selected_config_id": self.selected_config_id,
            "failure_reason": self.failure_reason,
            "rounds": self.rounds,
            "diagnosis": list(self.diagnosis),
            "notes": list(self.notes),
        }
        if include_timing:
            obj["timing"] = dict(self.timing)
        return obj
