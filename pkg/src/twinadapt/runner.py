"""Run configuration loading and batch orchestration.

``scenario run`` hosts plant, monitor and engine in one process on a
deterministic simulated clock: frames are fed in timestamp order and a
triggered adaptation cycle completes before the next frame is ingested, so
two runs on identical inputs produce byte-identical records outside the
segregated wall-clock block.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .engine.actors import AgentRuntime
from .engine.bus import EventBus
from .engine.messages import (
    FAILURE_NO_ADEQUATE,
    OUTCOME_ADAPTED,
    TRIGGER_ASSET_DEVIATION,
    TriggerEvent,
)
from .engine.pdca import AdaptationEngine, EngineConfig
from .errors import ConfigError
from .monitor import GapMonitor, MonitorConfig
from .plant import PlantScenario, VirtualPlant, load_scenario
from .pool import (
    Binding,
    Coupling,
    ModelConfiguration,
    ModelPool,
    RequirementSpec,
    load_manifest,
    parse_phenomena,
)
from .signals import SimTrace, decode_frame

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BIND = 3
EXIT_NO_ADEQUATE = 4


@dataclass
class RunSetup:
    pool: ModelPool
    requirement: RequirementSpec
    monitor_config: MonitorConfig
    engine_config: EngineConfig
    active_config: ModelConfiguration
    weights: tuple[float, float, float] | None
    directives: dict[str, str]
    telemetry_source: str | None
    history_path: str
    gap_log_path: str
    base_dir: Path


def load_run_config(path: str) -> RunSetup:
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(config_path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file is not valid TOML: {exc}") from exc
    base = config_path.parent

    pool_section = doc.get("pool", {})
    manifest = pool_section.get("manifest")
    if not manifest:
        raise ConfigError("config section [pool] needs a 'manifest' path")
    manifest_path = (base / manifest).resolve()
    if not manifest_path.exists():
        raise ConfigError(f"pool manifest not found: {manifest_path}")
    pool = load_manifest(str(manifest_path))

    req_section = doc.get("requirement", {})
    requirement = RequirementSpec(
        app_id=str(req_section.get("app_id", "app")),
        required_phenomena=parse_phenomena(req_section.get("phenomena", [])),
        monitored_signals=frozenset(req_section.get("monitored_signals", [])),
        window_length=float(req_section.get("window_length", 30.0)),
    )
    problems = requirement.violations()
    if problems:
        raise ConfigError("requirement invalid: " + "; ".join(problems))

    mon_section = doc.get("monitor", {})
    monitor_config = MonitorConfig(
        epsilon=float(mon_section.get("epsilon", 0.05)),
        window_length=float(mon_section.get("window_length", requirement.window_length)),
        monitored_signals=requirement.monitored_signals,
        holdoff_windows=int(mon_section.get("holdoff_windows", 1)),
        stimulus_signals=tuple(mon_section.get("stimulus_signals", ["item_arrival"])),
        dt=float(mon_section.get("dt", 0.05)),
    )

    eng_section = doc.get("engine", {})
    engine_config = EngineConfig(
        epsilon_accept=float(eng_section.get("epsilon_accept", monitor_config.epsilon)),
        batch_size=int(eng_section.get("batch_size", 4)),
        max_rounds=int(eng_section.get("max_rounds", 3)),
        dt=monitor_config.dt,
        fit_budget=int(eng_section.get("fit_budget", 200)),
        fit_tol=float(eng_section.get("fit_tol", 1e-4)),
    )
    weights = None
    if "weights" in eng_section:
        w = eng_section["weights"]
        if len(w) != 3:
            raise ConfigError("engine.weights must be [time, cost, quality]")
        weights = (float(w[0]), float(w[1]), float(w[2]))
    directives = {str(k): str(v) for k, v in eng_section.get("directives", {}).items()}

    active_section = doc.get("active", {})
    if not active_section:
        raise ConfigError("config section [active] must bind at least one slot")
    bindings = {}
    for slot, model_id in active_section.items():
        descriptor = pool.get(str(model_id))  # raises UnknownModelIdError
        bindings[str(slot)] = Binding(descriptor.id, descriptor.nominal_params())
    couplings = []
    for entry in doc.get("coupling", []):
        src_slot, _, src_port = str(entry["from"]).partition(".")
        dst_slot, _, dst_port = str(entry["to"]).partition(".")
        couplings.append(Coupling(src_slot, src_port, dst_slot, dst_port))
    config_id = "cfg[" + ",".join(f"{s}={b.model_id}" for s, b in sorted(bindings.items())) + "]"
    active_config = ModelConfiguration(id=config_id, bindings=bindings, couplings=couplings)
    violations = pool.validate_configuration(active_config)
    if violations:
        raise ConfigError("active configuration invalid: " + "; ".join(violations))

    service_section = doc.get("service", {})
    telemetry_section = doc.get("telemetry", {})
    return RunSetup(
        pool=pool,
        requirement=requirement,
        monitor_config=monitor_config,
        engine_config=engine_config,
        active_config=active_config,
        weights=weights,
        directives=directives,
        telemetry_source=telemetry_section.get("source"),
        history_path=str(service_section.get("history", "history.jsonl")),
        gap_log_path=str(service_section.get("gap_log", "gap.jsonl")),
        base_dir=base,
    )


@dataclass
class System:
    """A wired monitor + engine + agent runtime."""

    setup: RunSetup
    bus: EventBus
    monitor: GapMonitor
    engine: AdaptationEngine
    runtime: AgentRuntime
    gap_reports: list = field(default_factory=list)

    def stop(self) -> None:
        self.runtime.stop()


def build_system(
    setup: RunSetup,
    on_record=None,
    on_gap=None,
    use_model_agents: bool = True,
    synchronous_triggers: bool = True,
) -> System:
    """Wire monitor, engine and agents for one run.

    With ``synchronous_triggers`` every monitor breach blocks ingestion
    until the adaptation cycle completes (deterministic batch semantics);
    a live service submits asynchronously instead.
    """
    bus = EventBus()
    monitor = GapMonitor(setup.monitor_config, setup.pool)
    engine = AdaptationEngine(
        setup.pool,
        setup.requirement,
        monitor,
        config=setup.engine_config,
        bus=bus,
        on_record=on_record,
    )
    if setup.weights is not None or setup.directives:
        engine.set_goal_template(setup.weights, setup.directives)
    runtime = AgentRuntime(engine, use_model_agents=use_model_agents)
    system = System(setup=setup, bus=bus, monitor=monitor, engine=engine, runtime=runtime)

    def handle_report(report):
        system.gap_reports.append(report)
        bus.publish("gap_report", report.to_json_obj())
        if on_gap:
            on_gap(report)

    def handle_trigger(report, measured, stimulus):
        trigger = TriggerEvent(
            kind=TRIGGER_ASSET_DEVIATION,
            report=report,
            measured=measured,
            stimulus=stimulus,
        )
        future = runtime.submit(trigger)
        if synchronous_triggers:
            future.result(timeout=600.0)

    def handle_degraded(info):
        bus.publish("monitor_degraded", info)

    monitor.on_report = handle_report
    monitor.on_trigger = handle_trigger
    monitor.on_degraded = handle_degraded
    engine.activate_initial(setup.active_config)
    runtime.start()
    return system


@dataclass
class ScenarioRunResult:
    exit_code: int
    records: list
    gap_reports: list
    report: dict


def scenario_run(
    setup: RunSetup, scenario: PlantScenario, report_path: str | None = None
) -> ScenarioRunResult:
    """Batch end-to-end run: plant + monitor + engine in one process."""
    started = time.perf_counter()
    records = []
    system = build_system(setup, on_record=records.append)
    try:
        plant = VirtualPlant(scenario)
        for frame in plant.frames():
            system.monitor.ingest(frame)
    finally:
        system.stop()
    wall = time.perf_counter() - started

    adapted = [r for r in records if r.outcome == OUTCOME_ADAPTED]
    failed_no_adequate = [r for r in records if r.failure_reason == FAILURE_NO_ADEQUATE]
    if adapted:
        exit_code = EXIT_OK
    elif failed_no_adequate:
        exit_code = EXIT_NO_ADEQUATE
    else:
        exit_code = 1  # nothing was activated

    report = {
        "records": [r.to_json_obj(include_timing=False) for r in records],
        "gap_reports": [g.to_json_obj() for g in system.gap_reports],
        "active_config_id": system.engine.status()["active_config_id"],
        "exit_code": exit_code,
        "timing": {
            "wall_seconds": wall,
            "cycle_wall_seconds": [r.timing.get("wall_seconds") for r in records],
            "sim_wall_by_model": dict(sorted(system.engine.sim_wall_by_model.items())),
        },
    }
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return ScenarioRunResult(exit_code, records, system.gap_reports, report)


def replay_run(setup: RunSetup, telemetry_path: str) -> ScenarioRunResult:
    """Feed a recorded telemetry file through monitor + engine."""
    records = []
    system = build_system(setup, on_record=records.append)
    try:
        with open(telemetry_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    system.monitor.ingest(decode_frame(line))
    finally:
        system.stop()
    report = {
        "records": [r.to_json_obj(include_timing=False) for r in records],
        "gap_reports": [g.to_json_obj() for g in system.gap_reports],
        "triggers": system.monitor.stats.triggers,
    }
    return ScenarioRunResult(EXIT_OK, records, system.gap_reports, report)


def bench_run(bench_path: str, cases: list[str]) -> list[dict]:
    """Timing comparison across the configured cases; one row per case."""
    bench_file = Path(bench_path)
    if not bench_file.exists():
        raise ConfigError(f"bench case file not found: {bench_path}")
    with open(bench_file, "rb") as fh:
        doc = tomllib.load(fh)
    case_table = doc.get("case", {})
    rows = []
    for name in cases:
        entry = case_table.get(name)
        if entry is None:
            raise ConfigError(f"bench case {name!r} not defined in {bench_path}")
        base = bench_file.parent
        setup = load_run_config(str(base / entry["config"]))
        scenario = load_scenario(str(base / entry["scenario"]))
        result = scenario_run(setup, scenario)
        fit_iterations = 0
        for record in result.records:
            if record.stage1_fit:
                fit_iterations += record.stage1_fit.iterations
            for batch in record.stage2_batches:
                for ev in batch:
                    if ev.fit:
                        fit_iterations += ev.fit.iterations
        sim_wall = result.report["timing"]["sim_wall_by_model"]
        dominant = max(sim_wall, key=sim_wall.get) if sim_wall else None
        rows.append(
            {
                "case": name,
                "exit_code": result.exit_code,
                "wall_seconds": result.report["timing"]["wall_seconds"],
                "fit_iterations": fit_iterations,
                "sim_wall_by_model": sim_wall,
                "dominant_model": dominant,
                "selected": [
                    r.selected_config_id for r in result.records if r.selected_config_id
                ],
            }
        )
    return rows


def format_bench_table(rows: list[dict]) -> str:
    header = f"{'case':<8} {'wall [s]':>10} {'fit iters':>10} {'dominant model':>18} {'share':>7}"
    lines = [header, "-" * len(header)]
    for row in rows:
        total = sum(row["sim_wall_by_model"].values()) or 1.0
        dom = row["dominant_model"] or "-"
        share = row["sim_wall_by_model"].get(dom, 0.0) / total if dom != "-" else 0.0
        lines.append(
            f"{row['case']:<8} {row['wall_seconds']:>10.3f} "
            f"{row['fit_iterations']:>10d} {dom:>18} {share:>6.0%}"
        )
    return "\n".join(lines)
