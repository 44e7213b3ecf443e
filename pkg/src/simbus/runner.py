"""The label-tests run: config, scenario discovery, execution, and report.

Every scenario under the tests directory runs through simulator -> signal
mapping -> sink stack; each gets a pass/fail label and the whole run maps to
a CI exit code: 0 all pass, 1 at least one failure, 2 nothing was labeled
(configuration or I/O error, or no scenarios found).
"""

from __future__ import annotations

import concurrent.futures
import logging
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .codec import CodecStats
from .dbc import DbcDatabase, load_dbc
from .errors import ConfigError
from .mapping import SignalMapping, build_frames, load_mapping
from .report import print_summary, render_scenario_figure, render_summary_figure, write_report
from .scenario import (
    Outcome,
    ScenarioSpec,
    TestResult,
    drive,
    label_replay,
    load_scenario,
    replay_trace,
)
from .sinks import SinkConfig, open_sink_stack, resolve_env

log = logging.getLogger(__name__)

SCENARIO_EXTENSIONS = (".yml", ".yaml")
TRACE_EXTENSIONS = (".csv",)

# accepted for config-file compatibility; no behavior attached here
PASSTHROUGH_KEYS = ("home", "user", "obstacles", "bump_dist", "delineator_dist",
                    "tree_dist", "field_of_view")


@dataclass
class RunConfig:
    """Everything the label-tests command needs, file and flags merged."""

    command: str = "label-tests"
    home: str | None = None
    user: str | None = None
    tests: str | None = None
    rf: float = 1.5
    oob: float = 0.3
    max_speed: float = 50.0
    interrupt: bool = False
    obstacles: object = None
    bump_dist: object = None
    delineator_dist: object = None
    tree_dist: object = None
    field_of_view: object = None
    canbus: bool = False
    can_stdout: bool = False
    can_dbc: str | None = None
    can_dbc_map: str | None = None
    can_interface: str | None = None
    can_channel: str = "vcan0"
    can_bitrate: int = 250_000
    influxdb_bucket: str = ""
    influxdb_org: str = ""
    report: str = "results.csv"
    plots: bool = True
    plots_dir: str | None = None
    parallel: bool = False


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}
_FLOAT_KEYS = {"rf", "oob", "max_speed"}
_INT_KEYS = {"can_bitrate"}
_BOOL_KEYS = {"interrupt", "canbus", "can_stdout", "plots", "parallel"}


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from an optional YAML file plus overrides.

    The file follows the ``command:`` / ``options:`` shape; flat files are
    accepted too. Unknown keys warn (forward compatibility); invariant
    violations raise ConfigError (fatal, exit code 2).
    """
    merged: dict = {}
    if path is not None:
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a mapping")
        options = raw.get("options") if isinstance(raw.get("options"), dict) else {
            k: v for k, v in raw.items() if k != "command"
        }
        if "command" in raw:
            merged["command"] = raw["command"]
        for key, value in (options or {}).items():
            if key in _CONFIG_KEYS:
                merged[key] = value
            else:
                log.warning("%s: unknown config key %r ignored", path, key)
        ignored = [k for k in PASSTHROUGH_KEYS if merged.get(k) not in (None, False)]
        if ignored:
            log.warning("%s: keys %s are accepted but have no effect here",
                        path, ", ".join(ignored))
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    config = RunConfig()
    for key, value in merged.items():
        if value is None:
            continue
        try:
            if key in _FLOAT_KEYS:
                value = float(value)
            elif key in _INT_KEYS:
                value = int(value)
            elif key in _BOOL_KEYS:
                if not isinstance(value, bool):
                    raise ValueError(f"expected a boolean, got {value!r}")
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
        setattr(config, key, value)

    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if not 0.0 <= config.oob <= 1.0:
        raise ConfigError(f"oob must be in [0, 1], got {config.oob}")
    if config.max_speed <= 0:
        raise ConfigError(f"max_speed must be > 0, got {config.max_speed}")
    if config.can_bitrate <= 0:
        raise ConfigError(f"can_bitrate must be > 0, got {config.can_bitrate}")
    if config.canbus:
        if not config.can_dbc:
            raise ConfigError("canbus is enabled but can_dbc is not set")
        if not config.can_dbc_map:
            raise ConfigError("canbus is enabled but can_dbc_map is not set")


@dataclass
class RunReport:
    results: list[TestResult] = field(default_factory=list)
    wall_time_s: float = 0.0
    frames_emitted: int = 0
    clamp_events: int = 0

    @property
    def pass_count(self) -> int:
        return sum(1 for r in self.results if r.outcome is Outcome.PASS)

    @property
    def fail_count(self) -> int:
        return len(self.results) - self.pass_count

    @property
    def exit_code(self) -> int:
        if not self.results:
            return 2
        return 1 if self.fail_count else 0


def discover_scenarios(tests_dir) -> list[Path]:
    """All scenario and trace files under the directory, sorted for determinism."""
    root = Path(tests_dir)
    if not root.is_dir():
        raise ConfigError(f"tests directory not found: {root}")
    found = [
        p for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in SCENARIO_EXTENSIONS + TRACE_EXTENSIONS
    ]
    return sorted(found, key=lambda p: p.as_posix())


def sink_config_from(config: RunConfig, env_file=".env") -> SinkConfig:
    """Translate run options into the sink stack configuration."""
    descriptor = None
    if config.canbus and config.can_interface:
        descriptor = f"{config.can_interface}:{config.can_channel}"
    influx_on = bool(config.influxdb_bucket or config.influxdb_org)
    return SinkConfig(
        stdout_enabled=config.canbus and config.can_stdout,
        channel=descriptor,
        bitrate=config.can_bitrate,
        channel_name=config.can_channel,
        influx_bucket=config.influxdb_bucket if influx_on else "",
        influx_org=config.influxdb_org if influx_on else "",
        influx_url=resolve_env("INFLUXDB_URL", env_file) if influx_on else "",
        influx_token=resolve_env("INFLUXDB_TOKEN", env_file) if influx_on else "",
    )


def _run_one(path: Path, config: RunConfig):
    """Load and execute a single scenario or trace file."""
    if path.suffix.lower() in TRACE_EXTENSIONS:
        states = replay_trace(path)
        return None, states, label_replay(path.stem, states)
    defaults = {"rf": config.rf, "oob": config.oob,
                "max_speed": config.max_speed, "interrupt": config.interrupt}
    spec = load_scenario(path, defaults=defaults)
    states, result = drive(spec)
    return spec, states, result


def run_label_tests(config: RunConfig, console_stream=None, err_stream=None) -> RunReport:
    """Execute every discovered scenario and write the report.

    Returns the report; the caller maps report.exit_code (and any raised
    ConfigError / sink error) onto the process exit code.
    """
    err = err_stream if err_stream is not None else sys.stderr
    if not config.tests:
        raise ConfigError("no tests directory configured")
    started = time.perf_counter()

    db: DbcDatabase | None = None
    mapping: SignalMapping | None = None
    sink = None
    stats = CodecStats()
    if config.canbus:
        db = load_dbc(config.can_dbc)
        mapping = load_mapping(config.can_dbc_map, db)
        sink = open_sink_stack(sink_config_from(config), db, mapping,
                               console_stream=console_stream)

    paths = discover_scenarios(config.tests)
    report = RunReport()
    if not paths:
        err.write(f"no scenarios found under {config.tests}\n")
        return report

    runs: list[tuple[ScenarioSpec | None, list, TestResult]] = []
    pure_labeling = sink is None or sink.depth == 0
    try:
        if config.parallel and pure_labeling:
            with concurrent.futures.ThreadPoolExecutor() as pool:
                runs = list(pool.map(lambda p: _run_one(p, config), paths))
        else:
            if config.parallel and not pure_labeling:
                log.warning("parallel mode needs a sink-free run; executing sequentially")
            for path in paths:
                spec, states, result = _run_one(path, config)
                if sink is not None and mapping is not None:
                    for state in states:
                        for frame in build_frames(state, mapping, db, stats):
                            sink.emit(frame)
                            report.frames_emitted += 1
                runs.append((spec, states, result))
    finally:
        if sink is not None:
            sink.close()

    report.results = [result for _, _, result in runs]
    report.clamp_events = stats.clamp_events
    report.wall_time_s = time.perf_counter() - started

    write_report(report.results, config.report)
    print_summary(report.results, stream=err)
    if config.plots:
        _render_figures(config, runs)
    return report


def _render_figures(config: RunConfig, runs) -> None:
    out_dir = Path(config.plots_dir) if config.plots_dir else (
        Path(config.report).parent / (Path(config.report).stem + "_figures")
    )
    thresholds = {}
    for spec, states, result in runs:
        if spec is None or not states:
            continue  # traces carry no lane geometry to draw
        thresholds[result.scenario] = spec.oob
        render_scenario_figure(spec, states, result, out_dir / f"{result.scenario}.png")
    results = [result for _, _, result in runs]
    if results:
        render_summary_figure(results, thresholds, out_dir / "summary.png")
