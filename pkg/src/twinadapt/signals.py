"""Signal frames, simulation traces, and their NDJSON wire encoding.

One frame is a single timestamped sample or event on a named signal; the
same JSON object shape travels over the telemetry socket, the remote-model
protocol, and replay files. A SimTrace is a windowed bundle of per-signal
series, used both for measured windows and simulation output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ProtocolError

KIND_SAMPLE = "sample"
KIND_EVENT = "event"


@dataclass(frozen=True)
class SignalFrame:
    """A single timestamped value on one signal stream."""

    t: float
    signal: str
    value: float
    kind: str  # KIND_SAMPLE or KIND_EVENT

    def to_json_obj(self) -> dict:
        return {"t": self.t, "signal": self.signal, "value": self.value, "kind": self.kind}

    @staticmethod
    def from_json_obj(obj: dict) -> "SignalFrame":
        for key in ("t", "signal", "value", "kind"):
            if key not in obj:
                raise ProtocolError(f"frame missing field {key!r}")
        kind = obj["kind"]
        if kind not in (KIND_SAMPLE, KIND_EVENT):
            raise ProtocolError(f"frame field 'kind' must be sample|event, got {kind!r}")
        try:
            t = float(obj["t"])
            value = float(obj["value"])
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"frame field 't'/'value' not numeric: {exc}") from exc
        return SignalFrame(t=t, signal=str(obj["signal"]), value=value, kind=kind)


def encode_frame(frame: SignalFrame) -> str:
    """One NDJSON line (no trailing newline)."""
    return json.dumps(frame.to_json_obj(), separators=(",", ":"))


def decode_frame(line: str) -> SignalFrame:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"frame line is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("frame line must decode to a JSON object")
    return SignalFrame.from_json_obj(obj)


@dataclass
class SimTrace:
    """Per-signal sample series and event lists over a half-open window.

    Timestamps live in [t0, t1); sample series are strictly increasing in
    time per signal, event lists nondecreasing. ``meta`` carries run
    metadata (wall-clock duration etc.) and is excluded from equality so
    that determinism checks compare only the semantic payload.
    """

    t0: float
    t1: float
    samples: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    events: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict, compare=False)

    def add_sample(self, signal: str, t: float, value: float) -> None:
        self.samples.setdefault(signal, []).append((t, value))

    def add_event(self, signal: str, t: float, value: float = 1.0) -> None:
        self.events.setdefault(signal, []).append((t, value))

    def add_frame(self, frame: SignalFrame) -> None:
        if frame.kind == KIND_SAMPLE:
            self.add_sample(frame.signal, frame.t, frame.value)
        else:
            self.add_event(frame.signal, frame.t, frame.value)

    def signal_names(self) -> set[str]:
        return set(self.samples) | set(self.events)

    def event_times(self, signal: str) -> list[float]:
        return [t for t, _ in self.events.get(signal, [])]

    def sample_arrays(self, signal: str) -> tuple[list[float], list[float]]:
        series = self.samples.get(signal, [])
        return [t for t, _ in series], [v for _, v in series]

    def frames(self):
        """All frames of the trace in (t, kind, signal) order."""
        out = []
        for signal, series in self.samples.items():
            out.extend(SignalFrame(t, signal, v, KIND_SAMPLE) for t, v in series)
        for signal, evs in self.events.items():
            out.extend(SignalFrame(t, signal, v, KIND_EVENT) for t, v in evs)
        out.sort(key=lambda f: (f.t, f.kind, f.signal))
        return out

    def validate(self) -> list[str]:
        """Invariant violations (empty list when well-formed)."""
        problems = []
        if not self.t1 > self.t0:
            problems.append(f"window end {self.t1} not after start {self.t0}")
        for signal, series in self.samples.items():
            prev = None
            for t, _ in series:
                if not (self.t0 <= t < self.t1):
                    problems.append(f"sample on {signal!r} at t={t} outside window")
                    break
                if prev is not None and t <= prev:
                    problems.append(f"sample times on {signal!r} not strictly increasing")
                    break
                prev = t
        for signal, evs in self.events.items():
            prev = None
            for t, _ in evs:
                if not (self.t0 <= t < self.t1):
                    problems.append(f"event on {signal!r} at t={t} outside window")
                    break
                if prev is not None and t < prev:
                    problems.append(f"event times on {signal!r} decrease")
                    break
                prev = t
        return problems

    def to_json_obj(self) -> dict:
        return {
            "window": [self.t0, self.t1],
            "samples": {s: [[t, v] for t, v in series] for s, series in self.samples.items()},
            "events": {s: [[t, v] for t, v in evs] for s, evs in self.events.items()},
            "meta": dict(self.meta),
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "SimTrace":
        if "window" not in obj:
            raise ProtocolError("trace missing field 'window'")
        window = obj["window"]
        if not (isinstance(window, (list, tuple)) and len(window) == 2):
            raise ProtocolError("trace field 'window' must be [t0, t1]")
        trace = SimTrace(t0=float(window[0]), t1=float(window[1]))
        for s, series in (obj.get("samples") or {}).items():
            trace.samples[str(s)] = [(float(t), float(v)) for t, v in series]
        for s, evs in (obj.get("events") or {}).items():
            trace.events[str(s)] = [(float(t), float(v)) for t, v in evs]
        trace.meta = dict(obj.get("meta") or {})
        return trace

    @staticmethod
    def from_frames(frames, t0: float, t1: float) -> "SimTrace":
        """Bundle frames with t0 <= t < t1 into a trace (others ignored)."""
        trace = SimTrace(t0=t0, t1=t1)
        for frame in frames:
            if t0 <= frame.t < t1:
                trace.add_frame(frame)
        return trace
