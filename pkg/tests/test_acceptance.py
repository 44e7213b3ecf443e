"""Acceptance suite: every release gate in one module.

Run with ``pytest tests/test_acceptance.py -v``; each criterion prints one
``ACCEPTANCE <n> (<name>): PASS|FAIL`` line on stderr.
"""

import io
import random
import re
import shutil
import socket
import subprocess
import sys
import time
from decimal import Decimal
from pathlib import Path

import pytest

from oracle import reference_pack, reference_unpack
from simbus.codec import (
    CanFrame,
    decode_frame,
    encode_message,
    pack_signal,
    phys_to_raw,
    raw_to_phys,
    unpack_signal,
)
from simbus.dbc import ByteOrder, SignalDef, load_dbc, lookup_signal
from simbus.errors import ConfigError
from simbus.report import read_report
from simbus.runner import RunConfig, load_config, run_label_tests, sink_config_from
from simbus.scenario import Outcome, Reason, drive, load_scenario
from simbus.sinks import SinkConfig, frame_bits, open_sink_stack
from simbus.wire import InprocReceiver

DATA = Path(__file__).resolve().parent / "data"


@pytest.mark.criterion(1, "dbc conformance")
def test_criterion_1_dbc_conformance():
    started = time.perf_counter()
    db = load_dbc(DATA / "sample.dbc")

    frame2 = db.message_by_name("sampleFrame2")
    assert (frame2.frame_id, frame2.dlc) == (177, 4)
    frame1 = db.message_by_name("sampleFrame1")
    assert (frame1.frame_id, frame1.dlc) == (161, 7)

    ws = lookup_signal(db, "sampleFrame2", "wheelspeed")
    assert (ws.start_bit, ws.bit_length) == (16, 16)
    assert ws.byte_order is ByteOrder.LITTLE_ENDIAN and not ws.signed
    assert (ws.factor, ws.offset) == (Decimal("0.2"), 0)
    assert (ws.min_phys, ws.max_phys) == (0, 13107)
    assert ws.unit == "rpm"

    brake = lookup_signal(db, "sampleFrame1", "brake")
    assert (brake.start_bit, brake.bit_length) == (0, 16)
    assert brake.factor == Decimal("0.0001")
    assert (brake.min_phys, brake.max_phys) == (0, 1)

    throttle = lookup_signal(db, "sampleFrame1", "throttle")
    assert (throttle.start_bit, throttle.bit_length) == (16, 16)
    assert throttle.factor == Decimal("0.0001")
    assert (throttle.min_phys, throttle.max_phys) == (0, 1)

    steering = lookup_signal(db, "sampleFrame1", "steering")
    assert (steering.start_bit, steering.bit_length) == (32, 17)
    assert steering.byte_order is ByteOrder.LITTLE_ENDIAN and steering.signed
    assert (steering.factor, steering.offset) == (Decimal("0.01"), 0)
    assert (steering.min_phys, steering.max_phys) == (Decimal("-655.36"), Decimal("655.35"))
    assert steering.unit == "degree"

    assert time.perf_counter() - started < 1.0


@pytest.mark.criterion(2, "codec round trip")
def test_criterion_2_codec_round_trip(sample_db):
    started = time.perf_counter()
    rng = random.Random(2)
    for message in sample_db.messages:
        for sig in message.signals:
            lo, hi = float(sig.min_phys), float(sig.max_phys)
            bound = float(sig.factor) / 2 + 1e-9
            for _ in range(1000):
                value = rng.uniform(lo, hi)
                decoded = raw_to_phys(sig, phys_to_raw(sig, value))
                assert abs(float(decoded) - value) <= bound
    assert time.perf_counter() - started < 1.0


@pytest.mark.criterion(3, "bit packing oracle equivalence")
def test_criterion_3_oracle_equivalence():
    rng = random.Random(3)
    mismatches = 0
    for _ in range(10_000):
        order = rng.choice(list(ByteOrder))
        length = rng.randint(1, 64)
        if order is ByteOrder.LITTLE_ENDIAN:
            start = rng.randint(0, 64 - length)
        else:
            msb_index = rng.randint(0, 64 - length)
            start = (msb_index // 8) * 8 + (7 - msb_index % 8)
        sig = SignalDef(name="x", start_bit=start, bit_length=length,
                        byte_order=order, signed=rng.random() < 0.5)
        raw = rng.randint(*sig.raw_range())
        base = bytes(rng.getrandbits(8) for _ in range(8))
        packed = pack_signal(base, sig, raw)
        if packed != reference_pack(base, sig, raw):
            mismatches += 1
        if unpack_signal(packed, sig) != reference_unpack(packed, sig):
            mismatches += 1
    assert mismatches == 0


@pytest.mark.criterion(4, "golden frame")
def test_criterion_4_golden_frame(sample_db):
    frame = encode_message(sample_db, "sampleFrame1", {
        "brake": Decimal("0.2"), "throttle": Decimal("0.5"), "steering": Decimal("-1.5"),
    })
    assert frame.data == bytes.fromhex("D00788136AFF01")


def _free_udp_port() -> int:
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return port


_MONITOR_LINE = re.compile(
    r"\((?P<t>\d+\.\d{6})\) \S+ 0B1#\S+ \| sampleFrame2\.wheelspeed=(?P<v>[\d.]+) rpm"
)


@pytest.mark.criterion(5, "end-to-end two-process run")
def test_criterion_5_two_process_run(tmp_path):
    started = time.perf_counter()
    port = _free_udp_port()
    suite = tmp_path / "suite"
    suite.mkdir()
    shutil.copy(DATA / "scenarios" / "straight.yaml", suite / "straight.yaml")

    monitor = subprocess.Popen(
        [sys.executable, "-m", "simbus", "monitor",
         "--channel", f"udp:127.0.0.1:{port}",
         "--dbc", str(DATA / "sample.dbc"),
         "--expect", "sampleFrame2.wheelspeed:0:13107:50",
         "--timeout", "3"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    try:
        ready = monitor.stderr.readline()
        assert "listening" in ready

        generator = subprocess.run(
            [sys.executable, "-m", "simbus", "label-tests",
             "--tests", str(suite),
             "--canbus",
             "--can-dbc", str(DATA / "sample.dbc"),
             "--can-dbc-map", str(DATA / "dbc_map.json"),
             "--can-interface", "udp",
             "--can-channel", f"127.0.0.1:{port}",
             "--report", str(tmp_path / "results.csv"),
             "--no-plots"],
            capture_output=True, text=True, timeout=20,
        )
        assert generator.returncode == 0, generator.stderr
        mon_out, mon_err = monitor.communicate(timeout=15)
    finally:
        if monitor.poll() is None:
            monitor.kill()
    assert monitor.returncode == 0, mon_err

    # spot-check the decoded values against the simulator's state stream
    spec = load_scenario(DATA / "scenarios" / "straight.yaml")
    states, _ = drive(spec)
    wheel_by_time = {round(st.t, 6): st.wheel_speed for st in states}
    checked = 0
    for match in _MONITOR_LINE.finditer(mon_out):
        t = round(float(match["t"]), 6)
        if t in wheel_by_time:
            assert abs(float(match["v"]) - wheel_by_time[t]) <= 0.2 + 1e-9
            checked += 1
    assert checked >= 50
    assert time.perf_counter() - started < 30.0


@pytest.mark.criterion(6, "regression labeling")
def test_criterion_6_regression_labeling(tmp_path):
    runs = []
    for i in range(3):
        report_path = tmp_path / f"results{i}.csv"
        config = RunConfig(
            tests=str(DATA / "scenarios"), report=str(report_path), plots=False,
            rf=1.5, oob=0.3, max_speed=50.0,
        )
        report = run_label_tests(config, err_stream=io.StringIO())
        assert report.exit_code == 1
        by_name = {r.scenario: r for r in report.results}
        assert by_name["straight"].outcome is Outcome.PASS
        assert by_name["hairpin"].outcome is Outcome.FAIL
        assert by_name["hairpin"].reason is Reason.OOB_EXCEEDED
        records = read_report(report_path)
        assert len(records) == 2
        runs.append(report_path.read_text())
    assert runs[0] == runs[1] == runs[2]


@pytest.mark.criterion(7, "pacing and raw throughput")
def test_criterion_7_pacing(tmp_path):
    frames = [CanFrame(0x100, 8, bytes(8), timestamp_ns=i) for i in range(1000)]

    paced = open_sink_stack(SinkConfig(channel="inproc:pace-acc", bitrate=250_000, pace=True))
    start = time.perf_counter()
    for frame in frames:
        paced.emit(frame)
    paced_elapsed = time.perf_counter() - start
    paced.close()
    limit = 250_000 / frame_bits(8)  # == 250000 / 111
    assert (len(frames) - 1) / paced_elapsed <= limit * 1.05

    unpaced = open_sink_stack(SinkConfig(channel="inproc:fast-acc", pace=False))
    start = time.perf_counter()
    for frame in frames:
        unpaced.emit(frame)
    unpaced_elapsed = time.perf_counter() - start
    unpaced.close()
    assert len(frames) / unpaced_elapsed >= 20_000


@pytest.mark.criterion(8, "faster than real time")
def test_criterion_8_faster_than_real_time(tmp_path):
    # simulated duration pinned to 49 s by the time limit on an endless road
    scenario_dir = tmp_path / "scen"
    scenario_dir.mkdir()
    (scenario_dir / "longhaul.yaml").write_text(
        "waypoints:\n  - [0.0, 0.0]\n  - [5000.0, 0.0]\nduration_limit: 49\n"
    )
    rx = InprocReceiver("rt-acc")
    config = RunConfig(
        tests=str(scenario_dir), report=str(tmp_path / "results.csv"), plots=False,
        canbus=True, can_stdout=False,
        can_dbc=str(DATA / "sample.dbc"), can_dbc_map=str(DATA / "dbc_map.json"),
        can_interface="inproc", can_channel="rt-acc",
    )
    start = time.perf_counter()
    report = run_label_tests(config, err_stream=io.StringIO())
    elapsed = time.perf_counter() - start
    rx.close()

    result = report.results[0]
    assert result.sim_duration == pytest.approx(49.0, abs=0.051)
    assert report.frames_emitted == 2 * result.ticks
    assert elapsed <= 4.9, f"generation took {elapsed:.2f}s for 49s of traffic"


@pytest.mark.criterion(9, "config fidelity")
def test_criterion_9_config_fidelity(monkeypatch, tmp_path):
    config = load_config(DATA / "run_config.yml")
    assert config.canbus is True
    assert config.can_stdout is True
    assert config.can_dbc == "tests/data/sample.dbc"
    assert config.can_dbc_map == "tests/data/dbc_map.json"
    assert config.can_interface == "socketcan"
    assert config.can_channel == "vcan0"
    assert config.can_bitrate == 250000
    assert config.influxdb_bucket == "your_InfluxDB_bucket"
    assert config.influxdb_org == "your_InfluxDB_organization"
    assert (config.rf, config.oob, config.max_speed) == (1.5, 0.3, 50.0)
    assert config.interrupt is False

    # influx layer requested but the token is absent -> named configuration error
    monkeypatch.setenv("INFLUXDB_URL", "http://influx.example.org:8086")
    monkeypatch.delenv("INFLUXDB_TOKEN", raising=False)
    monkeypatch.chdir(tmp_path)  # no .env here
    db = load_dbc(DATA / "sample.dbc")
    sink_config = sink_config_from(config)
    with pytest.raises(ConfigError, match="INFLUXDB_TOKEN"):
        open_sink_stack(sink_config, db)
