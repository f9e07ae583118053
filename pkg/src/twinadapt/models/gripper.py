"""Vacuum gripper models at depths 1-3.

All depths share the cycle geometry (approach, handle, transfer, release);
what changes is how the handling phase is resolved:

* depth 1 -- pure phase state machine, the grip always succeeds;
* depth 2 -- one dead-time element covering the full cycle, success is a
  parameter;
* depth 3 -- continuous evacuation physics: the relative vacuum follows
  p(t) = p_cap * (1 - exp(-t/tau)), the part is held when the resulting
  force over the suction cups beats the weight with a safety margin.

The physical constants and the depth-3 cycle arithmetic here are the single
source of truth; the virtual plant uses the same functions so that
"reality" and the depth-3 model agree to the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..kernels import evac_crossing_time, evac_pressure
from .base import ModelInstance, StepResult, register_implementation

# Cycle phase durations (seconds)
PHASE_APPROACH = 1.0
PHASE_GRIP_D1 = 0.5  # fixed handling phase of the depth-1 machine
PHASE_TRANSFER = 1.5
PHASE_RELEASE = 0.5

# Depth-3 evacuation physics
EVAC_TIMEOUT = 2.0  # give up waiting for vacuum after this long
READY_FRACTION = 0.8  # grip once p >= READY_FRACTION * nominal capability
CUP_AREA_M2 = 7.07e-4  # effective area of one 30 mm suction cup
CUP_COUNT = 2
WORKPIECE_MASS_KG = 1.5
SAFETY_FACTOR = 2.0
GRAVITY = 9.81
SAMPLE_PERIOD = 0.1  # suction-pressure sample spacing (absolute grid)

PORT_ITEM_IN = "item_in"
PORT_PICK_DONE = "pick_done"
PORT_PICK_FAILED = "pick_failed"
PORT_PRESSURE = "pressure"


def holding_force(p_kpa: float) -> float:
    """Holding force in newtons at a relative vacuum of ``p_kpa``."""
    return p_kpa * 1000.0 * CUP_AREA_M2 * CUP_COUNT


def required_force(mass_kg: float = WORKPIECE_MASS_KG, safety: float = SAFETY_FACTOR) -> float:
    return mass_kg * GRAVITY * safety


@dataclass(frozen=True)
class GripCycle:
    """Resolved depth-3 cycle: all event times, computed once per item."""

    start: float
    evac_start: float
    success: bool
    event_at: float  # pick completion or failure instant
    vac_end: float  # vacuum present during [evac_start, vac_end)
    p_cap: float
    tau: float

    def pressure_at(self, t: float) -> float:
        if self.evac_start <= t < self.vac_end:
            return evac_pressure(self.p_cap, self.tau, t - self.evac_start)
        return 0.0


def plan_grip(p_cap: float, tau: float, nominal_capability: float) -> tuple[bool, float]:
    """Resolve one depth-3 handling phase.

    Returns (success, handling duration since evacuation start). Evacuation
    runs until the vacuum reaches READY_FRACTION of the *nominal* capability
    or EVAC_TIMEOUT elapses; the part is dropped on timeout or if the
    holding force at that moment is below the required force.
    """
    p_ready = READY_FRACTION * nominal_capability
    crossing = evac_crossing_time(p_cap, tau, p_ready)
    if crossing > EVAC_TIMEOUT:
        return False, EVAC_TIMEOUT
    force = holding_force(evac_pressure(p_cap, tau, crossing))
    if force < required_force():
        return False, crossing
    return True, crossing


def resolve_cycle(start: float, p_cap: float, tau: float, nominal_capability: float) -> GripCycle:
    """Depth-3 cycle starting at ``start`` with a parameter snapshot."""
    evac_start = start + PHASE_APPROACH
    success, handling = plan_grip(p_cap, tau, nominal_capability)
    grip_at = evac_start + handling
    if success:
        done = grip_at + PHASE_TRANSFER
        done = done + PHASE_RELEASE
        return GripCycle(start, evac_start, True, done, done, p_cap, tau)
    return GripCycle(start, evac_start, False, grip_at, grip_at, p_cap, tau)


def sample_grid_start(t: float) -> int:
    """Index of the first SAMPLE_PERIOD grid point at or after ``t``."""
    n = int(t / SAMPLE_PERIOD)
    while n * SAMPLE_PERIOD < t:
        n += 1
    return n


class _FifoGripper(ModelInstance):
    """Shared busy bookkeeping: one item handled at a time, FIFO queue."""

    def reset(self) -> None:
        self._busy_until = -float("inf")
        self._pending: list[tuple[float, str]] = []
        self._on_reset()

    def _on_reset(self) -> None:
        pass

    def _cycle_start(self, arrival: float) -> float:
        return arrival if arrival >= self._busy_until else self._busy_until

    def _emit_due(self, t_end: float, result: StepResult) -> None:
        self._pending.sort()
        due = [p for p in self._pending if p[0] < t_end]
        self._pending = [p for p in self._pending if p[0] >= t_end]
        for when, port in due:
            result.events.append((port, when, 1.0))


class GripperD1(_FifoGripper):
    """Depth-1 discrete-event machine: fixed phases, grip always succeeds."""

    required_ports = (PORT_ITEM_IN, PORT_PICK_DONE)

    def step(self, t, t_end, inputs) -> StepResult:
        result = StepResult()
        for arrival, _ in inputs.get(PORT_ITEM_IN, []):
            start = self._cycle_start(arrival)
            done = start + PHASE_APPROACH
            done = done + PHASE_GRIP_D1
            done = done + PHASE_TRANSFER
            done = done + PHASE_RELEASE
            self._pending.append((done, PORT_PICK_DONE))
            self._busy_until = done
        self._emit_due(t_end, result)
        return result


class GripperD2(ModelInstance):
    """Depth-2 dead-time element: pick completes T_cycle after the request.

    ``grip_success`` (when declared as a tunable) encodes the boolean
    outcome on [0, 1]: values >= 0.5 succeed. A failed grip reports on the
    ``pick_failed`` port after the same dead time, if that port exists.
    """

    required_ports = (PORT_ITEM_IN, PORT_PICK_DONE)

    def reset(self) -> None:
        self._pending: list[tuple[float, str]] = []

    def step(self, t, t_end, inputs) -> StepResult:
        result = StepResult()
        t_cycle = self.params["T_cycle"]
        success = self.params.get("grip_success", 1.0) >= 0.5
        out_port = PORT_PICK_DONE
        if not success:
            out_port = PORT_PICK_FAILED if self.descriptor.port(PORT_PICK_FAILED) else None
        for te, _ in inputs.get(PORT_ITEM_IN, []):
            if out_port is not None:
                self._pending.append((te + t_cycle, out_port))
        self._pending.sort()
        due = [p for p in self._pending if p[0] < t_end]
        self._pending = [p for p in self._pending if p[0] >= t_end]
        for when, port in due:
            result.events.append((port, when, 1.0))
        return result


class GripperD3(_FifoGripper):
    """Depth-3 continuous gripper with explicit evacuation physics."""

    required_ports = (PORT_ITEM_IN, PORT_PICK_DONE, PORT_PICK_FAILED, PORT_PRESSURE)

    def _on_reset(self) -> None:
        self._cycles: list[GripCycle] = []

    def _nominal_capability(self) -> float:
        tun = self.descriptor.tunable("p_cap")
        return tun.nominal if tun is not None else self.params["p_cap"]

    def step(self, t, t_end, inputs) -> StepResult:
        result = StepResult()
        p_cap = self.params["p_cap"]
        tau = self.params["tau"]
        for arrival, _ in inputs.get(PORT_ITEM_IN, []):
            cycle = resolve_cycle(self._cycle_start(arrival), p_cap, tau, self._nominal_capability())
            self._pending.append(
                (cycle.event_at, PORT_PICK_DONE if cycle.success else PORT_PICK_FAILED)
            )
            self._cycles.append(cycle)
            self._busy_until = cycle.event_at
        self._emit_due(t_end, result)
        n = sample_grid_start(t)
        while True:
            ts = n * SAMPLE_PERIOD
            if ts >= t_end:
                break
            value = 0.0
            for cycle in self._cycles:
                if cycle.evac_start <= ts < cycle.vac_end:
                    value = cycle.pressure_at(ts)
                    break
            result.samples.append((PORT_PRESSURE, ts, value))
            n += 1
        self._cycles = [c for c in self._cycles if c.vac_end >= t_end]
        return result


register_implementation("gripper", 1, GripperD1)
register_implementation("gripper", 2, GripperD2)
register_implementation("gripper", 3, GripperD3)
