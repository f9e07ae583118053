"""Depth-2 conveyor: a dead-time transport element.

Every item event received on ``item_in`` reappears exactly T_d seconds
later on every declared out-port (a physical conveyor end may feed several
sensors, e.g. the gripper hand-over position and a flow counter).
"""

from __future__ import annotations

from .base import ModelInstance, StepResult, register_implementation

PORT_ITEM_IN = "item_in"


class ConveyorD2(ModelInstance):
    required_ports = (PORT_ITEM_IN,)

    def reset(self) -> None:
        self._pending: list[tuple[float, float]] = []  # (due time, value)

    def step(self, t, t_end, inputs) -> StepResult:
        result = StepResult()
        t_d = self.params["T_d"]
        for te, value in inputs.get(PORT_ITEM_IN, []):
            self._pending.append((te + t_d, value))
        self._pending.sort()
        due = [p for p in self._pending if p[0] < t_end]
        self._pending = [p for p in self._pending if p[0] >= t_end]
        out_ports = [p.name for p in self.descriptor.ports_by_direction("out")]
        for when, value in due:
            for port in out_ports:
                result.events.append((port, when, value))
        return result


register_implementation("conveyor", 2, ConveyorD2)
