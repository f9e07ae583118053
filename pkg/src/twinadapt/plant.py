"""Virtual production cell standing in for the real asset.

Items arrive on a conveyor that hands them to a vacuum gripper; the
gripper's evacuation physics are exactly the depth-3 model equations (same
closed-form helpers, same constants), so a depth-3 model with the plant's
true parameters reproduces the telemetry to numerical tolerance while
shallower models can only approximate it. Faults re-parameterize the
running plant and are how reality gaps are manufactured.

Telemetry signals:
  item_arrival      event   item placed on the conveyor intake (stimulus)
  conveyor_item_out event   item reaches the conveyor end
  item_at_gripper   event   same instant, hand-over sensor at the gripper
  pick_complete     event   part set down successfully
  grip_failed       event   part dropped (timeout or insufficient force)
  suction_pressure  sample  relative vacuum in kPa on a 10 Hz grid
"""

from __future__ import annotations

import heapq
import itertools
import random
import threading
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import InvalidScenarioError, UnknownParameterError
from .models.gripper import GripCycle, SAMPLE_PERIOD, resolve_cycle
from .signals import KIND_EVENT, KIND_SAMPLE, SignalFrame

SIG_ITEM_ARRIVAL = "item_arrival"
SIG_CONVEYOR_OUT = "conveyor_item_out"
SIG_ITEM_AT_GRIPPER = "item_at_gripper"
SIG_PICK_COMPLETE = "pick_complete"
SIG_GRIP_FAILED = "grip_failed"
SIG_PRESSURE = "suction_pressure"

PLANT_PARAMS = ("p_cap", "tau", "T_d")

DEFAULT_PARAMS = {"p_cap": 60.0, "tau": 0.3, "T_d": 1.5}
DEFAULT_PERIOD = 10.0


@dataclass(frozen=True)
class FaultInjection:
    t: float
    parameter: str
    new_value: float


@dataclass
class PlantScenario:
    params: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    duration: float = 120.0
    seed: int = 0
    noise_sigma: float = 0.0
    period: float | None = DEFAULT_PERIOD
    schedule_start: float = 0.0
    schedule_times: list[float] | None = None
    faults: list[FaultInjection] = field(default_factory=list)

    def violations(self) -> list[str]:
        problems = []
        if not self.duration > 0:
            problems.append("duration must be > 0")
        for name in PLANT_PARAMS:
            value = self.params.get(name)
            if value is None:
                problems.append(f"missing plant parameter {name!r}")
            elif not value > 0:
                problems.append(f"plant parameter {name!r} must be > 0")
        for name in self.params:
            if name not in PLANT_PARAMS:
                problems.append(f"unknown plant parameter {name!r}")
        if self.noise_sigma < 0:
            problems.append("noise_sigma must be >= 0")
        if self.schedule_times is None and (self.period is None or not self.period > 0):
            problems.append("schedule needs explicit times or a positive period")
        for fault in self.faults:
            if fault.parameter not in PLANT_PARAMS:
                problems.append(f"fault names unknown parameter {fault.parameter!r}")
            elif not fault.new_value > 0:
                problems.append(f"fault value for {fault.parameter!r} must be > 0")
            if not (0 <= fault.t <= self.duration):
                problems.append(f"fault time {fault.t} outside [0, {self.duration}]")
        return problems

    def arrival_times(self) -> list[float]:
        if self.schedule_times is not None:
            return [t for t in sorted(self.schedule_times) if 0 <= t <= self.duration]
        times = []
        k = 0
        while True:
            t = self.schedule_start + k * self.period
            if t > self.duration:
                break
            times.append(t)
            k += 1
        return times


def load_scenario(path: str) -> PlantScenario:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    plant = doc.get("plant", {})
    schedule = doc.get("schedule", {})
    params = dict(DEFAULT_PARAMS)
    for name in PLANT_PARAMS:
        if name in plant:
            params[name] = float(plant[name])
    scenario = PlantScenario(
        params=params,
        duration=float(plant.get("duration", 120.0)),
        seed=int(plant.get("seed", 0)),
        noise_sigma=float(plant.get("noise_sigma", 0.0)),
        period=float(schedule["period"]) if "period" in schedule else (
            None if "times" in schedule else DEFAULT_PERIOD
        ),
        schedule_start=float(schedule.get("start", 0.0)),
        schedule_times=[float(t) for t in schedule["times"]] if "times" in schedule else None,
        faults=[
            FaultInjection(
                t=float(f["t"]), parameter=str(f["parameter"]), new_value=float(f["value"])
            )
            for f in doc.get("fault", [])
        ],
    )
    problems = scenario.violations()
    if problems:
        raise InvalidScenarioError("; ".join(problems))
    return scenario


# heap event kinds, in tie-break priority order at equal times
_FAULT, _ARRIVAL, _CONVEYOR_OUT, _GRIP_START, _CYCLE_EVENT, _SAMPLE = range(6)


class VirtualPlant:
    """Incremental, deterministic frame generator for one scenario run.

    Frames come out strictly ordered by (t, kind priority); a fixed seed
    yields a byte-identical stream. ``inject`` mimics a live operator
    fault: it is equivalent to a scenario fault at the current plant time.
    """

    def __init__(self, scenario: PlantScenario):
        problems = scenario.violations()
        if problems:
            raise InvalidScenarioError("; ".join(problems))
        self.scenario = scenario
        self.params = dict(scenario.params)
        self.nominal = dict(scenario.params)
        self.now = 0.0
        self._lock = threading.Lock()
        self._seq = itertools.count()
        self._heap: list[tuple[float, int, int, object]] = []
        self._busy_until = -float("inf")
        self._cycles: list[GripCycle] = []
        self._rng = random.Random(scenario.seed) if scenario.noise_sigma > 0 else None
        for fault in scenario.faults:
            self._push(fault.t, _FAULT, fault)
        for t in scenario.arrival_times():
            self._push(t, _ARRIVAL, None)
        self._push(0.0, _SAMPLE, 0)

    def _push(self, t: float, kind: int, payload) -> None:
        heapq.heappush(self._heap, (t, kind, next(self._seq), payload))

    def inject(self, parameter: str, value: float, at: float | None = None) -> None:
        """Apply a fault at the current plant time (or a later explicit one)."""
        if parameter not in PLANT_PARAMS:
            raise UnknownParameterError(f"unknown plant parameter {parameter!r}")
        if not value > 0:
            raise InvalidScenarioError(f"value for {parameter!r} must be > 0")
        with self._lock:
            t = self.now if at is None else max(at, self.now)
            self._push(t, _FAULT, FaultInjection(t, parameter, value))

    def frames(self):
        """Generate the full telemetry stream in time order."""
        duration = self.scenario.duration
        while True:
            with self._lock:
                if not self._heap:
                    return
                t, kind, _, payload = heapq.heappop(self._heap)
                self.now = t
                if kind == _FAULT:
                    self.params[payload.parameter] = payload.new_value
                    continue
                if kind == _ARRIVAL:
                    out_t = t + self.params["T_d"]
                    self._push(out_t, _CONVEYOR_OUT, None)
                    emit = [SignalFrame(t, SIG_ITEM_ARRIVAL, 1.0, KIND_EVENT)]
                elif kind == _CONVEYOR_OUT:
                    start = t if t >= self._busy_until else self._busy_until
                    self._push(start, _GRIP_START, None)
                    emit = []
                    if t <= duration:
                        emit = [
                            SignalFrame(t, SIG_CONVEYOR_OUT, 1.0, KIND_EVENT),
                            SignalFrame(t, SIG_ITEM_AT_GRIPPER, 1.0, KIND_EVENT),
                        ]
                elif kind == _GRIP_START:
                    cycle = resolve_cycle(
                        t, self.params["p_cap"], self.params["tau"], self.nominal["p_cap"]
                    )
                    self._busy_until = cycle.event_at
                    self._cycles.append(cycle)
                    self._push(cycle.event_at, _CYCLE_EVENT, cycle)
                    continue
                elif kind == _CYCLE_EVENT:
                    signal = SIG_PICK_COMPLETE if payload.success else SIG_GRIP_FAILED
                    emit = [SignalFrame(t, signal, 1.0, KIND_EVENT)] if t <= duration else []
                elif kind == _SAMPLE:
                    ts = payload * SAMPLE_PERIOD
                    value = 0.0
                    for cycle in self._cycles:
                        if cycle.evac_start <= ts < cycle.vac_end:
                            value = cycle.pressure_at(ts)
                            break
                    self._cycles = [c for c in self._cycles if c.vac_end > ts]
                    if self._rng is not None:
                        value += self._rng.gauss(0.0, self.scenario.noise_sigma)
                    emit = [SignalFrame(ts, SIG_PRESSURE, value, KIND_SAMPLE)]
                    if (payload + 1) * SAMPLE_PERIOD <= duration:
                        self._push((payload + 1) * SAMPLE_PERIOD, _SAMPLE, payload + 1)
                else:  # pragma: no cover
                    raise AssertionError(f"unknown event kind {kind}")
            for frame in emit:
                yield frame


def run_plant(scenario: PlantScenario) -> list[SignalFrame]:
    """Batch-mode run: the complete telemetry stream of one scenario."""
    return list(VirtualPlant(scenario).frames())
