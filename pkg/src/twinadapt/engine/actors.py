"""Actor runtime: one sequential agent per PDCA step plus partial-model agents.

Each agent is a thread draining its own mailbox; messages are immutable
apart from the cycle context, whose ownership moves along the
Trigger -> Plan -> Do -> Check -> Act -> Output chain, so no two agents
touch it concurrently. Trigger agents are the single entry point: they
queue incoming triggers FIFO, coalesce back-to-back duplicates (same kind
and window), and enforce single-flight (one adaptation cycle at a time).

Partial-model agents own simulation execution: every engine-side model run
is a request to the agent responsible for that model, which computes
locally or forwards to the model's remote endpoint.
"""

from __future__ import annotations

import queue
import threading
import traceback
from concurrent.futures import Future
from dataclasses import dataclass, field

from ..errors import NoSuitableCandidateError, TwinAdaptError
from ..models.composite import simulate_single, staged_simulate
from ..models.remote import remote_simulate
from ..pool import ModelConfiguration, ModelPool
from ..signals import SimTrace
from .messages import FAILURE_NO_ADEQUATE, TriggerEvent
from .pdca import AdaptationEngine, CycleContext

_STOP = object()


class Actor:
    """A sequential message processor with its own mailbox thread."""

    def __init__(self, name: str):
        self.name = name
        self.mailbox: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._run, name=name, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self.mailbox.put(_STOP)

    def join(self, timeout: float | None = None) -> None:
        self._thread.join(timeout)

    def send(self, message) -> None:
        self.mailbox.put(message)

    def _run(self) -> None:
        while True:
            message = self.mailbox.get()
            if message is _STOP:
                return
            try:
                self.handle(message)
            except Exception:  # agents must survive handler bugs
                traceback.print_exc()

    def handle(self, message) -> None:  # pragma: no cover - abstract
        raise NotImplementedError


# -- messages ----------------------------------------------------------------


@dataclass
class SubmitTrigger:
    trigger: TriggerEvent
    future: Future


@dataclass
class CycleDone:
    ctx: CycleContext


@dataclass
class PlanCycle:
    ctx: CycleContext


@dataclass
class DoCycle:
    ctx: CycleContext


@dataclass
class CheckCycle:
    ctx: CycleContext
    candidates: list
    stage: str


@dataclass
class ActCycle:
    ctx: CycleContext


@dataclass
class CompleteCycle:
    ctx: CycleContext


@dataclass
class SimulateStage:
    model_id: str
    params: dict
    stimulus: SimTrace
    window: tuple[float, float]
    dt: float
    reply: Future


# -- partial-model agents ------------------------------------------------------


class PartialModelAgent(Actor):
    """Owns the execution of exactly one model, locally or remotely."""

    def __init__(self, pool: ModelPool, model_id: str):
        super().__init__(f"model:{model_id}")
        self.pool = pool
        self.model_id = model_id

    def handle(self, message) -> None:
        if not isinstance(message, SimulateStage):
            return
        try:
            descriptor = self.pool.get(self.model_id)
            if descriptor.endpoint:
                trace = remote_simulate(
                    descriptor.endpoint,
                    {
                        "op": "simulate",
                        "model": descriptor.id,
                        "params": dict(message.params),
                        "window": [message.window[0], message.window[1]],
                        "dt": message.dt,
                        "stimulus": [f.to_json_obj() for f in message.stimulus.frames()],
                    },
                )
            else:
                trace = simulate_single(
                    descriptor, message.params, message.stimulus, message.window, message.dt
                )
            message.reply.set_result(trace)
        except Exception as exc:
            message.reply.set_exception(exc)


class ModelAgentPool:
    """Routes configuration simulations through per-model agents."""

    def __init__(self, pool: ModelPool):
        self.pool = pool
        self._agents: dict[str, PartialModelAgent] = {}
        self._lock = threading.Lock()

    def agent_for(self, model_id: str) -> PartialModelAgent:
        with self._lock:
            agent = self._agents.get(model_id)
            if agent is None:
                self.pool.get(model_id)  # raises UnknownModelIdError early
                agent = PartialModelAgent(self.pool, model_id)
                agent.start()
                self._agents[model_id] = agent
        return agent

    def simulate_config(
        self, config: ModelConfiguration, stimulus: SimTrace, window, dt
    ) -> SimTrace:
        def run_stage(descriptor, params, stage_stim):
            reply: Future = Future()
            self.agent_for(descriptor.id).send(
                SimulateStage(descriptor.id, params, stage_stim, window, dt, reply)
            )
            return reply.result()

        return staged_simulate(config, self.pool, stimulus, window, dt, run_stage)

    def stop(self) -> None:
        with self._lock:
            for agent in self._agents.values():
                agent.stop()
            self._agents.clear()


# -- PDCA agents -----------------------------------------------------------------


class TriggerAgent(Actor):
    """Sole entry point: FIFO queue, coalescing, single-flight dispatch."""

    def __init__(self, runtime: "AgentRuntime"):
        super().__init__("trigger")
        self.runtime = runtime
        self._queue: list[tuple[TriggerEvent, list[Future]]] = []
        self._busy = False

    def handle(self, message) -> None:
        if isinstance(message, SubmitTrigger):
            key = message.trigger.coalesce_key()
            if self._queue and self._queue[-1][0].coalesce_key() == key:
                self._queue[-1][1].append(message.future)
            else:
                self._queue.append((message.trigger, [message.future]))
            self.runtime.engine.bus.publish(
                "trigger_queued", {"kind": message.trigger.kind, "queued": len(self._queue)}
            )
            self._dispatch_next()
        elif isinstance(message, CycleDone):
            record = message.ctx.record
            futures = getattr(message.ctx, "futures", [])
            for future in futures:
                future.set_result(record)
            self._busy = False
            self._dispatch_next()

    def _dispatch_next(self) -> None:
        if self._busy or not self._queue:
            return
        trigger, futures = self._queue.pop(0)
        self._busy = True
        ctx = self.runtime.engine.new_cycle(trigger)
        ctx.futures = futures
        self.runtime.plan_agent.send(PlanCycle(ctx))

    def queued_count(self) -> int:
        return len(self._queue) + (1 if self._busy else 0)


class PlanAgent(Actor):
    def __init__(self, runtime: "AgentRuntime"):
        super().__init__("plan")
        self.runtime = runtime

    def handle(self, message) -> None:
        if not isinstance(message, PlanCycle):
            return
        engine = self.runtime.engine
        ctx = message.ctx
        try:
            goal = engine.plan(ctx)
        except TwinAdaptError as exc:
            engine.fail_cycle(ctx, "PlanError", str(exc))
            self.runtime.output_agent.send(CompleteCycle(ctx))
            return
        if goal is None:
            engine.complete_no_adaptation(ctx)
            self.runtime.output_agent.send(CompleteCycle(ctx))
        else:
            self.runtime.do_agent.send(DoCycle(ctx))


class DoAgent(Actor):
    def __init__(self, runtime: "AgentRuntime"):
        super().__init__("do")
        self.runtime = runtime

    def handle(self, message) -> None:
        if not isinstance(message, DoCycle):
            return
        engine = self.runtime.engine
        ctx = message.ctx
        try:
            if not ctx.stage1_attempted:
                candidates = engine.do_stage1(ctx)
                if candidates:
                    self.runtime.check_agent.send(CheckCycle(ctx, candidates, "stage1"))
                    return
            candidates = engine.do_stage2(ctx)
        except NoSuitableCandidateError as exc:
            engine.fail_cycle(ctx, FAILURE_NO_ADEQUATE, str(exc))
            self.runtime.output_agent.send(CompleteCycle(ctx))
            return
        except TwinAdaptError as exc:
            engine.fail_cycle(ctx, "DoError", str(exc))
            self.runtime.output_agent.send(CompleteCycle(ctx))
            return
        self.runtime.check_agent.send(CheckCycle(ctx, candidates, "stage2"))


class CheckAgent(Actor):
    def __init__(self, runtime: "AgentRuntime"):
        super().__init__("check")
        self.runtime = runtime

    def handle(self, message) -> None:
        if not isinstance(message, CheckCycle):
            return
        engine = self.runtime.engine
        ctx = message.ctx
        try:
            selected = engine.check(ctx, message.candidates, message.stage)
        except TwinAdaptError as exc:
            engine.fail_cycle(ctx, "CheckError", str(exc))
            self.runtime.output_agent.send(CompleteCycle(ctx))
            return
        if selected is not None:
            self.runtime.act_agent.send(ActCycle(ctx))
        elif ctx.rounds >= engine.config.max_rounds:
            engine.fail_cycle(
                ctx,
                FAILURE_NO_ADEQUATE,
                f"no adequate configuration within {engine.config.max_rounds} rounds",
            )
            self.runtime.output_agent.send(CompleteCycle(ctx))
        else:
            self.runtime.do_agent.send(DoCycle(ctx))


class ActAgent(Actor):
    def __init__(self, runtime: "AgentRuntime"):
        super().__init__("act")
        self.runtime = runtime

    def handle(self, message) -> None:
        if not isinstance(message, ActCycle):
            return
        engine = self.runtime.engine
        ctx = message.ctx
        try:
            engine.act(ctx)
        except TwinAdaptError as exc:
            engine.fail_cycle(ctx, "ActError", str(exc))
        self.runtime.output_agent.send(CompleteCycle(ctx))


class OutputAgent(Actor):
    """Persists the record, notifies applications, releases the trigger agent."""

    def __init__(self, runtime: "AgentRuntime"):
        super().__init__("output")
        self.runtime = runtime

    def handle(self, message) -> None:
        if not isinstance(message, CompleteCycle):
            return
        self.runtime.engine.finalize_record(message.ctx)
        self.runtime.trigger_agent.send(CycleDone(message.ctx))


class AgentRuntime:
    """The running agent system around one AdaptationEngine."""

    def __init__(self, engine: AdaptationEngine, use_model_agents: bool = True):
        self.engine = engine
        self.model_agents = ModelAgentPool(engine.pool) if use_model_agents else None
        engine.model_executor = self.model_agents
        self.trigger_agent = TriggerAgent(self)
        self.plan_agent = PlanAgent(self)
        self.do_agent = DoAgent(self)
        self.check_agent = CheckAgent(self)
        self.act_agent = ActAgent(self)
        self.output_agent = OutputAgent(self)
        self._agents = [
            self.trigger_agent,
            self.plan_agent,
            self.do_agent,
            self.check_agent,
            self.act_agent,
            self.output_agent,
        ]
        self._started = False

    def start(self) -> None:
        if not self._started:
            for agent in self._agents:
                agent.start()
            self._started = True

    def stop(self) -> None:
        for agent in self._agents:
            agent.stop()
        if self.model_agents:
            self.model_agents.stop()
        self._started = False

    def submit(self, trigger: TriggerEvent) -> Future:
        """Queue a trigger; the future resolves to the AdaptationRecord."""
        if not self._started:
            self.start()
        future: Future = Future()
        self.trigger_agent.send(SubmitTrigger(trigger, future))
        return future

    def run_cycle(self, trigger: TriggerEvent, timeout: float | None = 300.0):
        """Submit and wait for the cycle's record (batch-mode entry point)."""
        return self.submit(trigger).result(timeout)

    def queued_triggers(self) -> int:
        return self.trigger_agent.queued_count()
