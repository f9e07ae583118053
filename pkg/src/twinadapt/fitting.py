"""Stage-1 parameter adaptation: bounded coordinate pattern search.

Simulations are discontinuous in event structure, so the search is
derivative-free: cycle through the tunables, probe +/- one step each,
accept strict improvements, halve all steps after a sweep without any
improvement. Everything is deterministic; bounds are enforced by
projection, never by rejecting a probe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import SimulationFailureError, TwinAdaptError
from .models.composite import DEFAULT_DT, CompositeModel
from .monitor import compute_deviation
from .signals import SimTrace

DEFAULT_BUDGET = 200
DEFAULT_TOL = 1e-4
INITIAL_STEP_FRACTION = 0.25
STEP_FLOOR_FRACTION = 1e-3


@dataclass(frozen=True)
class FitTunable:
    name: str
    lower: float
    upper: float
    initial: float


@dataclass
class FitRequest:
    tunables: list[FitTunable]
    objective: Callable[[dict[str, float]], float]
    budget: int = DEFAULT_BUDGET
    tol: float = DEFAULT_TOL

    def violations(self) -> list[str]:
        problems = []
        if not self.tunables:
            problems.append("tunables must be nonempty")
        if self.budget < 1:
            problems.append("budget must be >= 1")
        names = [t.name for t in self.tunables]
        if len(names) != len(set(names)):
            problems.append("tunable names must be unique")
        for tun in self.tunables:
            if not (tun.lower <= tun.initial <= tun.upper):
                problems.append(
                    f"initial {tun.name!r} = {tun.initial} outside "
                    f"[{tun.lower}, {tun.upper}]"
                )
        return problems


@dataclass
class FitResult:
    params: dict[str, float]
    residual: float
    iterations: int
    converged: bool
    trajectory: list[tuple[dict[str, float], float]] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "params": dict(sorted(self.params.items())),
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "trajectory": [
                {"params": dict(sorted(p.items())), "residual": d}
                for p, d in self.trajectory
            ],
        }


def make_deviation_objective(
    composite: CompositeModel,
    measured: SimTrace,
    stimulus: SimTrace,
    signals: set[str],
    dt: float = DEFAULT_DT,
) -> Callable[[dict[str, float]], float]:
    """Objective D(params) over qualified tunable names ('slot.param').

    Reuses the gap metric, so the fit residual and the monitored reality
    gap are the same quantity by construction.
    """
    window = (measured.t0, measured.t1)

    def objective(params: dict[str, float]) -> float:
        by_slot: dict[str, dict[str, float]] = {}
        for name, value in params.items():
            slot, _, pname = name.partition(".")
            by_slot.setdefault(slot, {})[pname] = value
        for slot, overrides in by_slot.items():
            instance = composite.instances.get(slot)
            if instance is None:
                raise SimulationFailureError(f"no local instance for slot {slot!r}", params)
            instance.params.update(overrides)
            composite.config.bindings[slot].params.update(overrides)
        trace = composite.simulate(stimulus, window, dt)
        return compute_deviation(measured, trace, signals).aggregate

    return objective


def fit_parameters(request: FitRequest) -> FitResult:
    """Minimize the objective over the tunable box; see module docstring.

    Running out of budget is not an error (``converged`` is False then); a
    failing simulation aborts with the offending point attached.
    """
    problems = request.violations()
    if problems:
        raise ValueError("; ".join(problems))

    order = list(request.tunables)
    x = {t.name: t.initial for t in order}
    steps = {t.name: INITIAL_STEP_FRACTION * (t.upper - t.lower) for t in order}
    floors = {t.name: STEP_FLOOR_FRACTION * (t.upper - t.lower) for t in order}
    bounds = {t.name: (t.lower, t.upper) for t in order}

    def evaluate(point: dict[str, float]) -> float:
        try:
            value = request.objective(point)
        except SimulationFailureError:
            raise
        except TwinAdaptError as exc:
            raise SimulationFailureError(str(exc), point) from exc
        return value

    best = evaluate(x)
    evals = 1
    trajectory = [(dict(x), best)]
    converged = best <= request.tol

    while evals < request.budget and best > request.tol:
        if all(steps[name] < floors[name] for name in steps):
            break
        sweep_start = best
        improved = False
        exhausted = False
        for tun in order:
            lo, hi = bounds[tun.name]
            for sign in (1.0, -1.0):
                if evals >= request.budget:
                    exhausted = True
                    break
                cand = x[tun.name] + sign * steps[tun.name]
                if cand < lo:
                    cand = lo
                elif cand > hi:
                    cand = hi
                if cand == x[tun.name]:
                    continue  # projection collapsed onto the current point
                trial = dict(x)
                trial[tun.name] = cand
                value = evaluate(trial)
                evals += 1
                if value < best:
                    x = trial
                    best = value
                    improved = True
                    trajectory.append((dict(x), best))
            if exhausted or best <= request.tol:
                break
        if exhausted:
            break
        converged = (sweep_start - best) < request.tol or best <= request.tol
        if not improved:
            for name in steps:
                steps[name] /= 2.0

    if best <= request.tol:
        converged = True
    return FitResult(
        params=dict(x),
        residual=best,
        iterations=evals,
        converged=converged,
        trajectory=trajectory,
    )
