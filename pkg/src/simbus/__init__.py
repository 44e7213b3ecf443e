"""simbus: CAN bus traffic generation and regression labeling from simulated driving.

Pipeline: scenario simulator -> DBC signal encoding -> composable sinks
(console / bus channel / time-series) -> receiver-side monitor. The
label-tests runner wraps the pipeline into a CI command with deterministic
reports and exit codes.
"""

from .codec import (
    CanFrame,
    CodecError,
    CodecStats,
    UnmappedFrameError,
    decode_frame,
    encode_message,
    pack_signal,
    phys_to_raw,
    raw_to_phys,
    unpack_signal,
)
from .dbc import (
    ByteOrder,
    DbcDatabase,
    DbcError,
    DbcSemanticError,
    DbcSyntaxError,
    MessageDef,
    SignalDef,
    UnknownMessageError,
    UnknownSignalError,
    load_dbc,
    lookup_signal,
    parse_dbc,
    render_dbc,
)
from .errors import ConfigError, SimbusError
from .mapping import Binding, MappingError, SignalMapping, build_frames, load_mapping
from .monitor import Expectation, check_expectations, parse_expectation, run_monitor
from .road import RoadCurve, RoadError
from .runner import RunConfig, RunReport, load_config, run_label_tests
from .scenario import (
    Outcome,
    Reason,
    ScenarioSpec,
    TestResult,
    VehicleState,
    drive,
    load_scenario,
    replay_trace,
    write_trace,
)
from .sinks import (
    FrameSink,
    SinkConfig,
    SinkWriteError,
    format_console,
    open_sink_stack,
    parse_console,
)
from .wire import (
    TransportError,
    deserialize_frame,
    open_receiver,
    open_sender,
    serialize_frame,
)

__version__ = "0.1.0"
