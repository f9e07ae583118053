"""Reality-gap monitoring: shadow simulation and windowed deviation.

The monitor buffers telemetry frames into fixed windows. When a window
closes it replays the measured stimulus events through the active
configuration (operation-parallel shadow simulation) and scores the
deviation per monitored signal: normalized RMSE for sampled signals,
greedy time-ordered event matching for event signals. A breach above the
threshold emits an adaptation trigger carrying the report and the recorded
window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import TwinAdaptError, WindowMismatchError
from .kernels import event_deviation, nrmse
from .models.composite import DEFAULT_DT, CompositeModel, compose
from .pool import ModelConfiguration, ModelPool
from .signals import SimTrace

DEFAULT_EPSILON = 0.05
DEFAULT_WINDOW = 30.0
DEFAULT_STIMULUS_SIGNALS = ("item_arrival",)


@dataclass
class MonitorConfig:
    epsilon: float = DEFAULT_EPSILON
    window_length: float = DEFAULT_WINDOW
    monitored_signals: frozenset[str] = frozenset()
    holdoff_windows: int = 1
    stimulus_signals: tuple[str, ...] = DEFAULT_STIMULUS_SIGNALS
    dt: float = DEFAULT_DT

    def violations(self) -> list[str]:
        problems = []
        if not self.epsilon > 0:
            problems.append("epsilon must be > 0")
        if not self.window_length > 0:
            problems.append("window_length must be > 0")
        return problems


@dataclass
class DeviationReport:
    """Windowed deviation between measured and simulated behavior."""

    window: tuple[float, float]
    per_signal: dict[str, float]
    aggregate: float
    epsilon: float
    breached: bool
    suppressed: bool = False

    def to_json_obj(self) -> dict:
        return {
            "window": [self.window[0], self.window[1]],
            "per_signal": dict(sorted(self.per_signal.items())),
            "aggregate": self.aggregate,
            "epsilon": self.epsilon,
            "breached": self.breached,
            "suppressed": self.suppressed,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "DeviationReport":
        return DeviationReport(
            window=(float(obj["window"][0]), float(obj["window"][1])),
            per_signal={str(k): float(v) for k, v in obj["per_signal"].items()},
            aggregate=float(obj["aggregate"]),
            epsilon=float(obj["epsilon"]),
            breached=bool(obj["breached"]),
            suppressed=bool(obj.get("suppressed", False)),
        )


def compute_deviation(
    measured: SimTrace,
    simulated: SimTrace,
    signals: set[str] | frozenset[str],
    epsilon: float = DEFAULT_EPSILON,
) -> DeviationReport:
    """Per-signal deviation and its mean over the given signal set.

    Sampled signals score NRMSE of the simulated series interpolated onto
    the measured timestamps; event signals score greedily matched |dt|
    normalized by window length plus the unmatched fraction. A signal is
    treated as sampled when either trace carries samples for it.
    """
    if measured.t0 != simulated.t0 or measured.t1 != simulated.t1:
        raise WindowMismatchError(
            f"windows differ: measured [{measured.t0}, {measured.t1}] vs "
            f"simulated [{simulated.t0}, {simulated.t1}]"
        )
    window_len = measured.t1 - measured.t0
    per_signal: dict[str, float] = {}
    for signal in sorted(signals):
        sampled = signal in measured.samples or signal in simulated.samples
        if sampled:
            mt, mv = measured.sample_arrays(signal)
            st, sv = simulated.sample_arrays(signal)
            per_signal[signal] = nrmse(mt, mv, st, sv)
        else:
            per_signal[signal] = event_deviation(
                measured.event_times(signal), simulated.event_times(signal), window_len
            )
    if per_signal:
        aggregate = sum(per_signal[s] for s in sorted(per_signal)) / len(per_signal)
    else:
        aggregate = 0.0
    return DeviationReport(
        window=(measured.t0, measured.t1),
        per_signal=per_signal,
        aggregate=aggregate,
        epsilon=epsilon,
        breached=aggregate > epsilon,
    )


@dataclass
class MonitorStats:
    frames: int = 0
    dropped_stale: int = 0
    windows_closed: int = 0
    triggers: int = 0
    degraded: int = 0


class GapMonitor:
    """Windowed telemetry consumer bound to the active configuration.

    ``on_report`` fires for every closed window, ``on_trigger`` only for
    non-suppressed breaches (payload: report, measured trace, stimulus
    trace), ``on_degraded`` when the shadow simulation itself fails.
    Windows are [k*W, (k+1)*W); a window closes when a frame at or past its
    end arrives. Frames older than the open window are dropped and counted.
    """

    def __init__(
        self,
        config: MonitorConfig,
        pool: ModelPool,
        on_report=None,
        on_trigger=None,
        on_degraded=None,
    ):
        problems = config.violations()
        if problems:
            raise ValueError("; ".join(problems))
        self.config = config
        self.pool = pool
        self.on_report = on_report
        self.on_trigger = on_trigger
        self.on_degraded = on_degraded
        self.stats = MonitorStats()
        self.active_config: ModelConfiguration | None = None
        self._composite: CompositeModel | None = None
        self._holdoff = 0
        self._window_index = 0
        self._buffer: list = []
        self.last_report: DeviationReport | None = None

    # -- binding -----------------------------------------------------------

    def bind(self, config: ModelConfiguration, holdoff: bool = False) -> None:
        """Attach the active configuration; holdoff skips trigger emission
        for the configured number of windows after an adaptation."""
        self.active_config = config
        self._composite = compose(config, self.pool)
        if holdoff:
            self._holdoff = self.config.holdoff_windows

    def effective_signals(self) -> set[str]:
        if self._composite is None:
            return set()
        return set(self.config.monitored_signals) & self._composite.output_signals()

    # -- ingestion ---------------------------------------------------------

    def window_bounds(self) -> tuple[float, float]:
        w = self.config.window_length
        return (self._window_index * w, (self._window_index + 1) * w)

    def ingest(self, frame) -> None:
        t0, t1 = self.window_bounds()
        if frame.t < t0:
            self.stats.dropped_stale += 1
            return
        while frame.t >= t1:
            self._close_window()
            t0, t1 = self.window_bounds()
        self.stats.frames += 1
        self._buffer.append(frame)

    def ingest_all(self, frames) -> None:
        for frame in frames:
            self.ingest(frame)

    # -- evaluation ---------------------------------------------------------

    def _close_window(self) -> None:
        t0, t1 = self.window_bounds()
        frames = self._buffer
        self._buffer = []
        self._window_index += 1
        self.stats.windows_closed += 1
        if self._composite is None:
            return
        measured = SimTrace.from_frames(frames, t0, t1)
        stimulus = SimTrace(t0=t0, t1=t1)
        for signal in self.config.stimulus_signals:
            for te, val in measured.events.get(signal, []):
                stimulus.add_event(signal, te, val)
        try:
            shadow = self._composite.simulate(stimulus, (t0, t1), self.config.dt)
            report = compute_deviation(
                measured, shadow, self.effective_signals(), self.config.epsilon
            )
        except TwinAdaptError as exc:
            self.stats.degraded += 1
            if self.on_degraded:
                self.on_degraded({"window": [t0, t1], "error": str(exc)})
            return
        if self._holdoff > 0:
            if report.breached:
                report.suppressed = True
            self._holdoff -= 1
        self.last_report = report
        if self.on_report:
            self.on_report(report)
        if report.breached and not report.suppressed:
            self.stats.triggers += 1
            if self.on_trigger:
                self.on_trigger(report, measured, stimulus)
