"""Plan-Do-Check-Act engine logic.

The engine owns pool, requirement, goal template, and the active
configuration; the agent runtime (actors.py) drives these step methods
from its message loop. Everything here is deterministic: wall-clock
readings go only into the segregated ``timing`` block of the record.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from ..errors import NoSuitableCandidateError, SimulationFailureError, TwinAdaptError
from ..fitting import FitRequest, FitResult, fit_parameters
from ..models.composite import DEFAULT_DT, compose
from ..monitor import GapMonitor, compute_deviation
from ..pool import (
    DIRECTIVE_ANY,
    ModelConfiguration,
    ModelPool,
    RequirementSpec,
    STATUS_ACTIVE,
    STATUS_RETIRED,
    total_depth,
)
from ..signals import SimTrace
from .bus import EventBus
from .messages import (
    AdaptationRecord,
    AdaptionGoal,
    CandidateEvaluation,
    FAILURE_NO_ADEQUATE,
    OUTCOME_ADAPTED,
    OUTCOME_FAILED,
    OUTCOME_NO_ADAPTATION,
    TRIGGER_ASSET_DEVIATION,
    TriggerEvent,
    normalize_weights,
)

DEFAULT_WEIGHTS = (0.2, 0.2, 0.6)


@dataclass
class EngineConfig:
    epsilon_accept: float = 0.05
    batch_size: int = 4
    max_rounds: int = 3
    dt: float = DEFAULT_DT
    fit_budget: int = 200
    fit_tol: float = 1e-4
    candidate_limit: int = 64
    default_weights: tuple[float, float, float] = DEFAULT_WEIGHTS


@dataclass
class CycleContext:
    """Mutable state of one adaptation cycle, handed between agents."""

    cycle_id: str
    trigger: TriggerEvent
    record: AdaptationRecord
    goal: AdaptionGoal | None = None
    measured: SimTrace | None = None
    stimulus: SimTrace | None = None
    rounds: int = 0
    stage1_attempted: bool = False
    batch_index: int = 0
    enumeration: list[ModelConfiguration] | None = None
    selected: CandidateEvaluation | None = None
    started: float = field(default_factory=time.perf_counter)


class AdaptationEngine:
    def __init__(
        self,
        pool: ModelPool,
        requirement: RequirementSpec,
        monitor: GapMonitor,
        config: EngineConfig | None = None,
        bus: EventBus | None = None,
        on_record=None,
    ):
        self.pool = pool
        self.requirement = requirement
        self.monitor = monitor
        self.config = config or EngineConfig()
        self.bus = bus or EventBus()
        self.on_record = on_record
        self.goal_weights: tuple[float, float, float] | None = None
        self.goal_directives: dict[str, str] = {}
        self.active_configs: list[ModelConfiguration] = []
        self.retired_configs: list[ModelConfiguration] = []
        self.records: list[AdaptationRecord] = []
        self.cycles_run = 0
        self._cycle_seq = 0
        # executor injected by the agent runtime; None means in-process
        self.model_executor = None
        # cumulative measured simulation wall time per model id (reporting
        # only; never part of records or scores)
        self.sim_wall_by_model: dict[str, float] = {}

    # -- wiring -------------------------------------------------------------

    def activate_initial(self, config: ModelConfiguration) -> None:
        config.status = STATUS_ACTIVE
        self.active_configs = [config]
        self.monitor.bind(config)

    def bound_config(self) -> ModelConfiguration:
        if not self.active_configs:
            raise TwinAdaptError("no active configuration bound")
        return self.active_configs[0]

    def set_goal_template(self, weights=None, directives=None) -> None:
        if weights is not None:
            self.goal_weights = normalize_weights(weights)
        if directives is not None:
            self.goal_directives = dict(directives)
        self.bus.publish(
            "goal_template",
            {"weights": self.goal_weights, "directives": dict(self.goal_directives)},
        )

    def next_cycle_id(self) -> str:
        self._cycle_seq += 1
        return f"cycle-{self._cycle_seq:04d}"

    def new_cycle(self, trigger: TriggerEvent) -> CycleContext:
        cycle_id = self.next_cycle_id()
        record = AdaptationRecord(cycle_id=cycle_id, trigger=trigger)
        ctx = CycleContext(
            cycle_id=cycle_id,
            trigger=trigger,
            record=record,
            measured=trigger.measured,
            stimulus=trigger.stimulus,
        )
        self.bus.publish("cycle_started", {"cycle_id": cycle_id, "trigger": trigger.kind})
        return ctx

    # -- simulation routing ---------------------------------------------------

    def simulate_config(
        self, config: ModelConfiguration, stimulus: SimTrace, window, dt=None
    ) -> SimTrace:
        dt = dt or self.config.dt
        if self.model_executor is not None:
            trace = self.model_executor.simulate_config(config, stimulus, window, dt)
        else:
            trace = compose(config, self.pool).simulate(stimulus, window, dt)
        for slot, seconds in trace.meta.get("model_wall", {}).items():
            model_id = config.bindings[slot].model_id
            self.sim_wall_by_model[model_id] = (
                self.sim_wall_by_model.get(model_id, 0.0) + seconds
            )
        return trace

    def deviation_of(
        self, config: ModelConfiguration, measured: SimTrace, stimulus: SimTrace
    ) -> float:
        trace = self.simulate_config(config, stimulus, (measured.t0, measured.t1))
        signals = set(self.monitor.config.monitored_signals) & self.pool.config_output_signals(config)
        return compute_deviation(measured, trace, signals).aggregate

    # -- Plan -----------------------------------------------------------------

    def plan(self, ctx: CycleContext) -> AdaptionGoal | None:
        trigger = ctx.trigger
        weights = self.goal_weights or normalize_weights(self.config.default_weights)
        if trigger.kind == TRIGGER_ASSET_DEVIATION:
            for config in self.active_configs:
                deviation = self.deviation_of(config, ctx.measured, ctx.stimulus)
                if deviation <= self.monitor.config.epsilon:
                    if config is not self.bound_config():
                        self.monitor.bind(config)
                        ctx.record.notes.append(f"rebound to {config.id}")
                        self.bus.publish(
                            "rebound", {"cycle_id": ctx.cycle_id, "config_id": config.id}
                        )
                    ctx.record.notes.append(
                        f"active configuration {config.id} resolves the deviation "
                        f"(D={deviation:.6g})"
                    )
                    return None
            goal = AdaptionGoal(self.requirement, dict(self.goal_directives), weights)
        else:
            requirement = trigger.requirement or self.requirement
            self.requirement = requirement
            for config in self.active_configs:
                suitable, _ = self.pool.check_suitability(config, requirement)
                if suitable:
                    ctx.record.notes.append(
                        f"requirement covered by active configuration {config.id}"
                    )
                    return None
            goal = AdaptionGoal(requirement, dict(self.goal_directives), weights)
        ctx.goal = goal
        ctx.record.goal = goal
        self.bus.publish("stage_entered", {"cycle_id": ctx.cycle_id, "stage": "plan"})
        return goal

    # -- Do -------------------------------------------------------------------

    def qualified_tunables(self, config: ModelConfiguration):
        """Fit variables 'slot.name' with bounds and current initial values."""
        from ..fitting import FitTunable

        tunables = []
        for slot in sorted(config.bindings):
            binding = config.bindings[slot]
            desc = self.pool.get(binding.model_id)
            for tun in sorted(desc.tunables, key=lambda t: t.name):
                initial = binding.params.get(tun.name, tun.nominal)
                tunables.append(
                    FitTunable(f"{slot}.{tun.name}", tun.lower, tun.upper, initial)
                )
        return tunables

    @staticmethod
    def params_by_slot(params: dict[str, float]) -> dict[str, dict[str, float]]:
        by_slot: dict[str, dict[str, float]] = {}
        for name, value in params.items():
            slot, _, pname = name.partition(".")
            by_slot.setdefault(slot, {})[pname] = value
        return by_slot

    def fit_config(self, ctx: CycleContext, config: ModelConfiguration) -> FitResult | None:
        """Fit all declared tunables of a configuration on the recorded window."""
        tunables = self.qualified_tunables(config)
        if not tunables:
            return None
        signals = set(self.monitor.config.monitored_signals) & self.pool.config_output_signals(
            config
        )
        window = (ctx.measured.t0, ctx.measured.t1)

        def objective(params: dict[str, float]) -> float:
            candidate = config.with_params(self.params_by_slot(params))
            trace = self.simulate_config(candidate, ctx.stimulus, window)
            return compute_deviation(ctx.measured, trace, signals).aggregate

        request = FitRequest(
            tunables=tunables,
            objective=objective,
            budget=self.config.fit_budget,
            tol=self.config.fit_tol,
        )
        return fit_parameters(request)

    def do_stage1(self, ctx: CycleContext):
        """Minimally invasive re-parameterization of the active configuration.

        Returns the fitted configuration as the sole candidate when the
        residual closes the gap; None hands over to stage 2.
        """
        ctx.stage1_attempted = True
        self.bus.publish("stage_entered", {"cycle_id": ctx.cycle_id, "stage": "do/stage1"})
        structural = sorted(
            slot for slot, d in ctx.goal.depth_directives.items() if d != DIRECTIVE_ANY
        )
        if structural:
            ctx.record.stage1_bypassed = (
                "structural directive on " + ", ".join(structural)
            )
            self.bus.publish(
                "stage1_bypassed",
                {"cycle_id": ctx.cycle_id, "reason": ctx.record.stage1_bypassed},
            )
            return None
        active = self.bound_config()
        fit = self.fit_config(ctx, active)
        if fit is None:
            ctx.record.stage1_bypassed = "no tunables declared"
            return None
        ctx.record.stage1_fit = fit
        if fit.residual <= self.config.epsilon_accept:
            fitted = active.with_params(self.params_by_slot(fit.params))
            fitted.id = f"{active.id}+refit-{ctx.cycle_id}"
            return [(fitted, fit)]
        ctx.record.notes.append(
            f"stage 1 residual {fit.residual:.6g} above "
            f"epsilon_accept {self.config.epsilon_accept}"
        )
        return None

    def do_stage2(self, ctx: CycleContext):
        """Next batch of orchestrated candidates, each fitted before Check."""
        self.bus.publish("stage_entered", {"cycle_id": ctx.cycle_id, "stage": "do/stage2"})
        if ctx.enumeration is None:
            ctx.enumeration = self.pool.enumerate_candidates(
                ctx.goal.requirement,
                self.bound_config(),
                ctx.goal.depth_directives,
                limit=self.config.candidate_limit,
            )
        start = ctx.batch_index * self.config.batch_size
        batch = ctx.enumeration[start : start + self.config.batch_size]
        if not batch:
            raise NoSuitableCandidateError("candidate enumeration exhausted")
        ctx.batch_index += 1
        out = []
        for candidate in batch:
            try:
                fit = self.fit_config(ctx, candidate)
            except (TwinAdaptError, SimulationFailureError) as exc:
                # the candidate stays in the batch; Check will mark it failed
                ctx.record.notes.append(f"fit of {candidate.id} failed: {exc}")
                out.append((candidate, None))
                continue
            fitted = (
                candidate.with_params(self.params_by_slot(fit.params))
                if fit is not None
                else candidate
            )
            out.append((fitted, fit))
        self.bus.publish(
            "stage2_batch",
            {
                "cycle_id": ctx.cycle_id,
                "batch": ctx.batch_index,
                "candidates": [c.id for c, _ in out],
            },
        )
        return out

    # -- Check ------------------------------------------------------------------

    def check(self, ctx: CycleContext, candidates, stage: str = "stage2") -> CandidateEvaluation | None:
        """Magic-triangle scoring of a candidate batch on the recorded window."""
        self.bus.publish("stage_entered", {"cycle_id": ctx.cycle_id, "stage": "check"})
        window = (ctx.measured.t0, ctx.measured.t1)
        window_len = ctx.measured.t1 - ctx.measured.t0
        evaluations: list[CandidateEvaluation] = []
        for config, fit in candidates:
            descs = [self.pool.get(b.model_id) for _, b in sorted(config.bindings.items())]
            ev = CandidateEvaluation(
                config=config,
                fit=fit,
                total_depth=total_depth(self.pool, config),
                eval_time=sum(d.compute_rating for d in descs) * window_len,
                cost=sum(d.cost_rating for d in descs),
            )
            try:
                trace = self.simulate_config(config, ctx.stimulus, window)
                signals = set(self.monitor.config.monitored_signals) & self.pool.config_output_signals(config)
                ev.deviation = compute_deviation(ctx.measured, trace, signals).aggregate
            except (TwinAdaptError, SimulationFailureError) as exc:
                ev.failed = True
                ev.error = str(exc)
            evaluations.append(ev)
        scorable = [e for e in evaluations if not e.failed]
        score_candidates(scorable, ctx.goal.weights, self.config.epsilon_accept)
        ranked = sorted(
            evaluations,
            key=lambda e: (e.failed, e.score, e.total_depth, e.cost, e.config.id),
        )
        if stage == "stage2":
            ctx.record.stage2_batches.append(ranked)
        ctx.record.ranked = ranked
        for ev in ranked:
            self.bus.publish(
                "candidate_evaluated",
                {
                    "cycle_id": ctx.cycle_id,
                    "config_id": ev.config.id,
                    "D": ev.deviation if not ev.failed else None,
                    "score": ev.score if not ev.failed else None,
                    "adequate": ev.adequate,
                    "failed": ev.failed,
                },
            )
        adequate = [e for e in scorable if e.adequate]
        ctx.rounds += 1
        ctx.record.rounds = ctx.rounds
        if not adequate:
            self.bus.publish(
                "check_no_selection", {"cycle_id": ctx.cycle_id, "round": ctx.rounds}
            )
            return None
        selected = min(
            adequate, key=lambda e: (e.score, e.total_depth, e.cost, e.config.id)
        )
        ctx.selected = selected
        self.bus.publish(
            "selection",
            {"cycle_id": ctx.cycle_id, "config_id": selected.config.id, "score": selected.score},
        )
        return selected

    # -- Act ----------------------------------------------------------------------

    def act(self, ctx: CycleContext) -> None:
        selected = ctx.selected
        if selected is None or not selected.adequate:
            raise TwinAdaptError("act() requires an adequate selection")
        self.bus.publish("stage_entered", {"cycle_id": ctx.cycle_id, "stage": "act"})
        previous = self.bound_config()
        previous.status = STATUS_RETIRED
        self.retired_configs.append(previous)
        selected.config.status = STATUS_ACTIVE
        self.active_configs = [selected.config]
        self.monitor.bind(selected.config, holdoff=True)
        ctx.record.outcome = OUTCOME_ADAPTED
        ctx.record.selected_config_id = selected.config.id
        ctx.record.diagnosis = self.diagnose(selected.config)
        self.bus.publish(
            "activated",
            {
                "cycle_id": ctx.cycle_id,
                "config_id": selected.config.id,
                "previous": previous.id,
                "diagnosis": ctx.record.diagnosis,
            },
        )

    def diagnose(self, config: ModelConfiguration) -> list[dict]:
        """Parameter drift of the selected configuration vs. its nominals."""
        entries = []
        for slot in sorted(config.bindings):
            binding = config.bindings[slot]
            desc = self.pool.get(binding.model_id)
            for tun in sorted(desc.tunables, key=lambda t: t.name):
                fitted = binding.params.get(tun.name, tun.nominal)
                if tun.nominal != 0:
                    relative = (fitted - tun.nominal) / tun.nominal
                else:
                    relative = fitted - tun.nominal
                entries.append(
                    {
                        "parameter": f"{slot}.{tun.name}",
                        "nominal": tun.nominal,
                        "fitted": fitted,
                        "relative_change": relative,
                    }
                )
        entries.sort(key=lambda e: (-abs(e["relative_change"]), e["parameter"]))
        return entries

    # -- cycle orchestration (used by the agent runtime) ----------------------------

    def fail_cycle(self, ctx: CycleContext, reason: str, detail: str | None = None) -> None:
        ctx.record.outcome = OUTCOME_FAILED
        ctx.record.failure_reason = reason
        if detail:
            ctx.record.notes.append(detail)
        self.bus.publish(
            "cycle_failed",
            {"cycle_id": ctx.cycle_id, "reason": reason, "detail": detail},
        )

    def complete_no_adaptation(self, ctx: CycleContext) -> None:
        ctx.record.outcome = OUTCOME_NO_ADAPTATION
        self.bus.publish("no_adaptation", {"cycle_id": ctx.cycle_id})

    def finalize_record(self, ctx: CycleContext) -> AdaptationRecord:
        ctx.record.timing["wall_seconds"] = time.perf_counter() - ctx.started
        ctx.record.timing["received_at"] = ctx.trigger.received_at
        self.cycles_run += 1
        self.records.append(ctx.record)
        if self.on_record:
            self.on_record(ctx.record)
        self.bus.publish(
            "record",
            {"cycle_id": ctx.cycle_id, "outcome": ctx.record.outcome,
             "selected": ctx.record.selected_config_id},
        )
        return ctx.record

    def status(self) -> dict:
        """Snapshot for /api/status."""
        active = self.active_configs[0] if self.active_configs else None
        summary = None
        if active is not None:
            summary = {
                slot: {
                    "model": b.model_id,
                    "depth": self.pool.get(b.model_id).depth,
                }
                for slot, b in sorted(active.bindings.items())
            }
        last = self.monitor.last_report
        return {
            "active_config_id": active.id if active else None,
            "active_summary": summary,
            "current_deviation": last.aggregate if last else None,
            "cycles_run": self.cycles_run,
            "goal_template": {
                "weights": list(self.goal_weights) if self.goal_weights else None,
                "directives": dict(self.goal_directives),
            },
            "monitor": {
                "epsilon": self.monitor.config.epsilon,
                "window_length": self.monitor.config.window_length,
                "windows_closed": self.monitor.stats.windows_closed,
                "dropped_stale": self.monitor.stats.dropped_stale,
            },
        }


def score_candidates(
    evaluations: list[CandidateEvaluation],
    weights: tuple[float, float, float],
    epsilon_accept: float,
) -> None:
    """Min-max normalize D/T/C over the batch and compute weighted scores.

    When a metric is constant over the batch every normalized value is 0,
    which makes scores invariant under positive affine transforms of any
    one raw metric.
    """
    if not evaluations:
        return
    w_time, w_cost, w_quality = weights

    def norm(values: list[float]) -> list[float]:
        lo, hi = min(values), max(values)
        if hi == lo:
            return [0.0 for _ in values]
        return [(v - lo) / (hi - lo) for v in values]

    nd = norm([e.deviation for e in evaluations])
    nt = norm([e.eval_time for e in evaluations])
    nc = norm([e.cost for e in evaluations])
    for ev, d_hat, t_hat, c_hat in zip(evaluations, nd, nt, nc):
        ev.norm_deviation = d_hat
        ev.norm_time = t_hat
        ev.norm_cost = c_hat
        ev.score = w_quality * d_hat + w_time * t_hat + w_cost * c_hat
        ev.adequate = ev.deviation <= epsilon_accept
