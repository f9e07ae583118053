"""Coupled execution of a model configuration.

Local composites run under a fixed-step master: per macro step every
instance is stepped once in topological coupling order and its output
events are forwarded downstream within the same step (couplings are
acyclic, so one exchange per step is exact for event semantics -- all
event timestamps are closed-form, not grid-quantized).

When a bound descriptor carries a remote endpoint the composite switches
to staged execution: models run whole-window in topological order, each
stage either locally or via the remote-model protocol, with upstream
output traces as downstream stimulus. On an acyclic graph this is
equivalent to the stepped master (tests assert the equality).
"""

from __future__ import annotations

import math
import time

from ..errors import AlgebraicLoopError, NumericalFailureError, TwinAdaptError
from ..pool import ModelConfiguration, ModelPool
from ..signals import SimTrace
from .base import ModelInstance, instantiate

DEFAULT_DT = 0.05


def topological_slots(config: ModelConfiguration) -> list[str]:
    """Slots in coupling order (sources first), lexicographic tie-break."""
    slots = sorted(config.bindings)
    incoming = {slot: 0 for slot in slots}
    edges: dict[str, set[str]] = {slot: set() for slot in slots}
    for c in config.couplings:
        if c.dst_slot not in edges.get(c.src_slot, set()):
            edges[c.src_slot].add(c.dst_slot)
            incoming[c.dst_slot] += 1
    order = []
    ready = sorted(s for s in slots if incoming[s] == 0)
    while ready:
        slot = ready.pop(0)
        order.append(slot)
        for nxt in sorted(edges[slot]):
            incoming[nxt] -= 1
            if incoming[nxt] == 0:
                ready.append(nxt)
        ready.sort()
    if len(order) != len(slots):
        raise AlgebraicLoopError("coupling graph over ports is cyclic")
    return order


class CompositeModel:
    """Executable coupled set of model instances."""

    def __init__(self, config: ModelConfiguration, pool: ModelPool, remote_client=None):
        self.config = config
        self.pool = pool
        self.order = topological_slots(config)
        self.descriptors = {
            slot: pool.get(binding.model_id) for slot, binding in config.bindings.items()
        }
        self.remote_client = remote_client
        self.remote_slots = {
            slot for slot, desc in self.descriptors.items() if desc.endpoint
        }
        self.instances: dict[str, ModelInstance] = {
            slot: instantiate(self.descriptors[slot], config.bindings[slot].params)
            for slot in self.order
            if slot not in self.remote_slots
        }
        # destination (slot, port name) pairs fed by couplings
        self._coupled_dst = {(c.dst_slot, c.dst_port) for c in config.couplings}
        # forwarding map: (src slot, src port name) -> [(dst slot, dst port name)]
        self._forward: dict[tuple[str, str], list[tuple[str, str]]] = {}
        for c in config.couplings:
            self._forward.setdefault((c.src_slot, c.src_port), []).append(
                (c.dst_slot, c.dst_port)
            )

    def unbound_in_ports(self, slot: str):
        desc = self.descriptors[slot]
        return [
            p
            for p in desc.ports_by_direction("in")
            if (slot, p.name) not in self._coupled_dst
        ]

    def input_signals(self) -> set[str]:
        return {
            p.signal for slot in self.order for p in self.unbound_in_ports(slot)
        }

    def output_signals(self) -> set[str]:
        out: set[str] = set()
        for desc in self.descriptors.values():
            out |= desc.output_signals()
        return out

    def reset(self) -> None:
        for instance in self.instances.values():
            instance.reset()

    def simulate(
        self, stimulus: SimTrace, window: tuple[float, float], dt: float = DEFAULT_DT
    ) -> SimTrace:
        t0, t1 = window
        if dt <= 0:
            raise ValueError("dt must be > 0")
        if not t1 > t0:
            raise ValueError("window end must be after start")
        _check_stimulus_window(stimulus, t0, t1)
        started = time.perf_counter()
        if self.remote_slots:
            trace = self._simulate_staged(stimulus, t0, t1, dt)
        else:
            self.reset()
            trace = _run_stepped(
                order=self.order,
                instances=self.instances,
                descriptors=self.descriptors,
                unbound={s: self.unbound_in_ports(s) for s in self.order},
                forward=self._forward,
                stimulus=stimulus,
                t0=t0,
                t1=t1,
                dt=dt,
            )
        trace.meta["wall_seconds"] = time.perf_counter() - started
        return trace

    def _simulate_staged(self, stimulus: SimTrace, t0: float, t1: float, dt: float) -> SimTrace:
        from .remote import remote_simulate  # local import: client needs no composer

        def run_stage(desc, params, stage_stim):
            if desc.endpoint:
                client = self.remote_client or remote_simulate
                return client(
                    desc.endpoint,
                    {
                        "op": "simulate",
                        "model": desc.id,
                        "params": dict(params),
                        "window": [t0, t1],
                        "dt": dt,
                        "stimulus": [f.to_json_obj() for f in stage_stim.frames()],
                    },
                )
            instance = self.instances[desc.slot]
            instance.reset()
            return _run_stepped(
                order=[desc.slot],
                instances={desc.slot: instance},
                descriptors={desc.slot: desc},
                unbound={desc.slot: desc.ports_by_direction("in")},
                forward={},
                stimulus=stage_stim,
                t0=t0,
                t1=t1,
                dt=dt,
            )

        return staged_simulate(self.config, self.pool, stimulus, (t0, t1), dt, run_stage)


def staged_simulate(
    config: ModelConfiguration,
    pool: ModelPool,
    stimulus: SimTrace,
    window: tuple[float, float],
    dt: float,
    run_stage,
) -> SimTrace:
    """Whole-window execution in topological order, one model per stage.

    ``run_stage(descriptor, params, stage_stimulus) -> SimTrace`` executes a
    single model (locally, on a remote endpoint, or via a partial-model
    agent); upstream output traces feed the downstream stages. Equivalent
    to the stepped master on acyclic couplings.
    """
    t0, t1 = window
    order = topological_slots(config)
    coupled_dst = {(c.dst_slot, c.dst_port) for c in config.couplings}
    produced = SimTrace(t0=t0, t1=t1)
    model_wall: dict[str, float] = {}
    for slot in order:
        desc = pool.get(config.bindings[slot].model_id)
        stage_stim = SimTrace(t0=t0, t1=t1)
        for port in desc.ports_by_direction("in"):
            source = produced if (slot, port.name) in coupled_dst else stimulus
            for te, val in source.events.get(port.signal, []):
                stage_stim.add_event(port.signal, te, val)
        started = time.perf_counter()
        stage_trace = run_stage(desc, config.bindings[slot].params, stage_stim)
        model_wall[slot] = time.perf_counter() - started
        for signal, evs in stage_trace.events.items():
            merged = produced.events.get(signal, []) + list(evs)
            merged.sort(key=lambda ev: ev[0])
            produced.events[signal] = merged
        for signal, series in stage_trace.samples.items():
            merged = produced.samples.get(signal, []) + list(series)
            merged.sort(key=lambda sv: sv[0])
            produced.samples[signal] = merged
    produced.meta["model_wall"] = model_wall
    return produced


def _check_stimulus_window(stimulus: SimTrace, t0: float, t1: float) -> None:
    for signal, evs in stimulus.events.items():
        for te, _ in evs:
            if not (t0 <= te < t1):
                raise ValueError(
                    f"stimulus event on {signal!r} at t={te} outside window [{t0}, {t1})"
                )
    for signal, series in stimulus.samples.items():
        for ts, _ in series:
            if not (t0 <= ts < t1):
                raise ValueError(
                    f"stimulus sample on {signal!r} at t={ts} outside window [{t0}, {t1})"
                )


def _run_stepped(order, instances, descriptors, unbound, forward, stimulus, t0, t1, dt) -> SimTrace:
    trace = SimTrace(t0=t0, t1=t1)
    model_wall = {slot: 0.0 for slot in order}
    # per-signal event cursors into the stimulus
    stim_events = {sig: evs for sig, evs in stimulus.events.items()}
    cursors = {sig: 0 for sig in stim_events}
    out_port_cache = {
        slot: {p.name: p for p in descriptors[slot].ports_by_direction("out")}
        for slot in order
    }
    steps = 0
    t_k = t0
    while t_k < t1:
        step_end = t0 + (steps + 1) * dt
        if step_end > t1:
            step_end = t1
        forwarded: dict[str, dict[str, list[tuple[float, float]]]] = {}
        for slot in order:
            inputs: dict[str, list[tuple[float, float]]] = {}
            for port in unbound[slot]:
                evs = stim_events.get(port.signal)
                if not evs:
                    continue
                i = cursors[port.signal]
                picked = []
                while i < len(evs) and evs[i][0] < step_end:
                    if evs[i][0] >= t_k:
                        picked.append(evs[i])
                    i += 1
                cursors[port.signal] = i
                if picked:
                    inputs.setdefault(port.name, []).extend(picked)
            for port_name, pending in forwarded.get(slot, {}).items():
                inputs.setdefault(port_name, []).extend(pending)
            started = time.perf_counter()
            result = instances[slot].step(t_k, step_end, inputs)
            model_wall[slot] += time.perf_counter() - started
            ports = out_port_cache[slot]
            for port_name, te, value in result.events:
                port = ports.get(port_name)
                if port is None:
                    raise TwinAdaptError(
                        f"model {descriptors[slot].id!r} emitted on undeclared "
                        f"out-port {port_name!r}"
                    )
                if not (math.isfinite(te) and math.isfinite(value)):
                    raise NumericalFailureError(port.signal, te)
                if t0 <= te < t1:
                    trace.add_event(port.signal, te, value)
                for dst_slot, dst_port in forward.get((slot, port_name), ()):
                    forwarded.setdefault(dst_slot, {}).setdefault(dst_port, []).append(
                        (te, value)
                    )
            for port_name, ts, value in result.samples:
                port = ports.get(port_name)
                if port is None:
                    raise TwinAdaptError(
                        f"model {descriptors[slot].id!r} emitted on undeclared "
                        f"out-port {port_name!r}"
                    )
                if not (math.isfinite(ts) and math.isfinite(value)):
                    raise NumericalFailureError(port.signal, ts)
                if t0 <= ts < t1:
                    trace.add_sample(port.signal, ts, value)
        steps += 1
        t_k = t0 + steps * dt
    trace.meta["model_wall"] = model_wall
    trace.meta["steps"] = steps
    return trace


def compose(config: ModelConfiguration, pool: ModelPool, remote_client=None) -> CompositeModel:
    """Build an executable composite; propagates instantiation errors."""
    return CompositeModel(config, pool, remote_client=remote_client)


def simulate_single(
    descriptor,
    params: dict[str, float],
    stimulus: SimTrace,
    window: tuple[float, float],
    dt: float = DEFAULT_DT,
) -> SimTrace:
    """Whole-window run of one model; the unit served by the model server."""
    t0, t1 = window
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if not t1 > t0:
        raise ValueError("window end must be after start")
    _check_stimulus_window(stimulus, t0, t1)
    instance = instantiate(descriptor, params)
    started = time.perf_counter()
    trace = _run_stepped(
        order=[descriptor.slot],
        instances={descriptor.slot: instance},
        descriptors={descriptor.slot: descriptor},
        unbound={descriptor.slot: descriptor.ports_by_direction("in")},
        forward={},
        stimulus=stimulus,
        t0=t0,
        t1=t1,
        dt=dt,
    )
    trace.meta["wall_seconds"] = time.perf_counter() - started
    return trace
