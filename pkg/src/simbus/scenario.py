"""Deterministic driving-scenario simulator and lane-keeping test oracle.

A kinematic bicycle model follows the scenario road with a pure-pursuit
steering controller and a proportional speed controller. Each tick the
oracle measures how much of the vehicle body sticks out of the lane; a test
fails as soon as that fraction exceeds the scenario's tolerance.

Everything is a pure function of (scenario, seed): two runs produce
bit-identical state streams and verdicts.
"""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import yaml

from .errors import SimbusError
from .road import RoadCurve

log = logging.getLogger(__name__)

DT = 0.05                 # s, simulation tick (also the CAN emission tick)
WHEELBASE_M = 2.5
VEHICLE_WIDTH_M = 1.8
WHEEL_RADIUS_M = 0.3
RPM_PER_MPS = 60.0 / (2.0 * math.pi * WHEEL_RADIUS_M)
BASE_LAT_ACCEL = 2.0      # m/s^2, scaled by the scenario risk factor
MAX_ACCEL = 2.5           # m/s^2
MAX_BRAKE = 6.0           # m/s^2
MAX_STEER_DEG = 35.0
SPEED_KP = 1.0            # 1/s
MIN_LOOKAHEAD_M = 5.0
CURVE_PREVIEW_M = 20.0
CURVATURE_EPS = 1e-6
ROAD_END_TOL_M = 0.1

SCENARIO_DEFAULTS = {
    "lane_width": 4.0,
    "max_speed": 50.0,   # km/h
    "rf": 1.5,
    "oob": 0.3,
    "interrupt": False,
    "seed": 0,
    "duration_limit": 120.0,
}

# accepted in scenario/config files but carrying no behavior here
IGNORED_SCENARIO_KEYS = ("obstacles", "bump_dist", "delineator_dist", "tree_dist", "field_of_view")


class ScenarioError(SimbusError):
    """Invalid scenario or trace file."""


class Outcome(str, Enum):
    PASS = "pass"
    FAIL = "fail"


class Reason(str, Enum):
    NONE = "none"
    OOB_EXCEEDED = "oob_exceeded"
    DURATION_LIMIT = "duration_limit"
    NUMERIC_FAULT = "numeric_fault"


@dataclass(frozen=True)
class ScenarioSpec:
    """Road plus oracle parameters for one test case."""

    name: str
    waypoints: tuple[tuple[float, float], ...]
    lane_width: float = 4.0
    max_speed: float = 50.0        # km/h
    rf: float = 1.5
    oob: float = 0.3
    interrupt: bool = False
    seed: int = 0
    duration_limit: float = 120.0  # s

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ScenarioError(f"scenario {self.name!r}: need at least 2 waypoints")
        if self.lane_width <= 0:
            raise ScenarioError(f"scenario {self.name!r}: lane_width must be > 0")
        if not 0.0 <= self.oob <= 1.0:
            raise ScenarioError(f"scenario {self.name!r}: oob must be in [0, 1]")
        if self.max_speed <= 0:
            raise ScenarioError(f"scenario {self.name!r}: max_speed must be > 0")


@dataclass(frozen=True)
class VehicleState:
    """Timestamped simulated vehicle state (SI units, steering in degrees)."""

    t: float
    x: float
    y: float
    heading: float          # rad
    speed: float            # m/s
    wheel_speed: float      # rpm
    throttle: float         # [0, 1]
    brake: float            # [0, 1]
    steering: float         # deg
    lateral_offset: float   # m, signed distance from lane center
    oob_fraction: float     # [0, 1]


CHANNEL_NAMES = (
    "t", "x", "y", "heading", "speed", "wheel_speed",
    "throttle", "brake", "steering", "lateral_offset", "oob_fraction",
)

TRACE_FIELDS = ("t", "x", "y", "heading", "speed", "throttle", "brake", "steering")


@dataclass(frozen=True)
class TestResult:
    scenario: str
    outcome: Outcome
    reason: Reason
    max_oob_fraction: float
    sim_duration: float
    ticks: int

    def __post_init__(self):
        if (self.outcome is Outcome.FAIL) != (self.reason is not Reason.NONE):
            raise ValueError("outcome fail iff reason is set")


def oob_fraction(lateral_offset: float, lane_width: float) -> float:
    """Fraction of the vehicle body outside the lane (0 fully in, 1 fully out)."""
    overhang = (abs(lateral_offset) + VEHICLE_WIDTH_M / 2.0) - lane_width / 2.0
    return min(max(overhang / VEHICLE_WIDTH_M, 0.0), 1.0)


def load_scenario(path, defaults: dict | None = None) -> ScenarioSpec:
    """Parse a YAML scenario file, applying defaults for omitted keys.

    ``defaults`` (typically the run-level rf/oob/max_speed/interrupt) sits
    between the built-in defaults and the file's own values.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: expected a mapping of scenario fields")

    merged = dict(SCENARIO_DEFAULTS)
    merged.update(defaults or {})
    merged["name"] = path.stem
    for key, value in raw.items():
        if key in ("name", "waypoints") or key in SCENARIO_DEFAULTS:
            merged[key] = value
        elif key in IGNORED_SCENARIO_KEYS:
            log.warning("%s: key %r has no effect here and is ignored", path, key)
        else:
            log.warning("%s: unknown key %r ignored", path, key)

    waypoints = merged.get("waypoints")
    if not isinstance(waypoints, (list, tuple)):
        raise ScenarioError(f"{path}: 'waypoints' must be a list of [x, y] pairs")
    try:
        wp = tuple((float(p[0]), float(p[1])) for p in waypoints)
    except (TypeError, ValueError, IndexError):
        raise ScenarioError(f"{path}: malformed waypoint entry") from None

    try:
        return ScenarioSpec(
            name=str(merged["name"]),
            waypoints=wp,
            lane_width=float(merged["lane_width"]),
            max_speed=float(merged["max_speed"]),
            rf=float(merged["rf"]),
            oob=float(merged["oob"]),
            interrupt=bool(merged["interrupt"]),
            seed=int(merged["seed"]),
            duration_limit=float(merged["duration_limit"]),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: malformed field: {exc}") from None


def _wrap_angle(angle: float) -> float:
    while angle > math.pi:
        angle -= 2.0 * math.pi
    while angle < -math.pi:
        angle += 2.0 * math.pi
    return angle


def drive(spec: ScenarioSpec) -> tuple[list[VehicleState], TestResult]:
    """Run the scenario to completion; returns the state stream and verdict."""
    road = RoadCurve(spec.waypoints)
    rng = random.Random(spec.seed)
    # small seeded start perturbation so distinct seeds yield distinct streams
    lat0 = rng.uniform(-0.05, 0.05)
    tx, ty = road.tangent_at(0.0)
    x0, y0 = road.point_at(0.0)
    x = x0 - ty * lat0
    y = y0 + tx * lat0
    heading = math.atan2(ty, tx)
    speed = 0.0
    v_max = spec.max_speed / 3.6
    allowed_lat = spec.rf * BASE_LAT_ACCEL

    states: list[VehicleState] = []
    max_oob = 0.0
    reason: Reason | None = None
    s_prev: float | None = None
    tick = 0

    while True:
        t = tick * DT
        if not all(map(math.isfinite, (x, y, heading, speed))):
            reason = reason or Reason.NUMERIC_FAULT
            break
        s, lateral = road.project(x, y, s_hint=s_prev)
        s_prev = s
        frac = oob_fraction(lateral, spec.lane_width)

        lookahead = max(MIN_LOOKAHEAD_M, 0.5 * speed)
        if s + lookahead <= road.total_length:
            gx, gy = road.point_at(s + lookahead)
        else:
            # extend the target beyond the end along the final tangent so the
            # chord never collapses while crossing the finish line
            ex, ey = road.point_at(road.total_length)
            etx, ety = road.tangent_at(road.total_length)
            overrun = s + lookahead - road.total_length
            gx, gy = ex + etx * overrun, ey + ety * overrun
        alpha = _wrap_angle(math.atan2(gy - y, gx - x) - heading)
        steer = math.atan2(2.0 * WHEELBASE_M * math.sin(alpha), lookahead)
        steer_limit = math.radians(MAX_STEER_DEG)
        steer = min(max(steer, -steer_limit), steer_limit)

        kappa = road.max_curvature(s, min(s + CURVE_PREVIEW_M, road.total_length))
        v_curve = math.sqrt(allowed_lat / max(kappa, CURVATURE_EPS))
        v_target = min(v_max, v_curve)
        accel = min(max(SPEED_KP * (v_target - speed), -MAX_BRAKE), MAX_ACCEL)
        throttle = accel / MAX_ACCEL if accel > 0 else 0.0
        brake = -accel / MAX_BRAKE if accel < 0 else 0.0

        states.append(VehicleState(
            t=t, x=x, y=y, heading=heading, speed=speed,
            wheel_speed=speed * RPM_PER_MPS,
            throttle=throttle, brake=brake,
            steering=math.degrees(steer),
            lateral_offset=lateral, oob_fraction=frac,
        ))
        max_oob = max(max_oob, frac)

        if frac > spec.oob and reason is None:
            reason = Reason.OOB_EXCEEDED
            if spec.interrupt:
                break
        if s >= road.total_length - ROAD_END_TOL_M:
            break

        # kinematic bicycle step (position advances with the pre-update speed)
        x += speed * math.cos(heading) * DT
        y += speed * math.sin(heading) * DT
        heading = _wrap_angle(heading + speed / WHEELBASE_M * math.tan(steer) * DT)
        speed = max(0.0, speed + accel * DT)
        tick += 1
        if tick * DT >= spec.duration_limit:
            reason = reason or Reason.DURATION_LIMIT
            break

    result = TestResult(
        scenario=spec.name,
        outcome=Outcome.FAIL if reason else Outcome.PASS,
        reason=reason or Reason.NONE,
        max_oob_fraction=max_oob,
        sim_duration=len(states) * DT,
        ticks=len(states),
    )
    return states, result


def write_trace(states, path) -> None:
    """Export a state stream as a CSV trace (the external-simulator format)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_FIELDS)
        for st in states:
            writer.writerow([repr(getattr(st, f)) for f in TRACE_FIELDS])


def replay_trace(path) -> list[VehicleState]:
    """Read a trace file back into a state stream.

    This is the seam where exports from external simulators plug in; lane
    metrics are not part of the trace format, so lateral_offset and
    oob_fraction replay as 0 and wheel_speed derives from speed.
    """
    path = Path(path)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise ScenarioError(f"trace file not found: {path}") from None
    states: list[VehicleState] = []
    with fh:
        reader = csv.DictReader(fh)
        missing = [f for f in TRACE_FIELDS if f not in (reader.fieldnames or ())]
        if missing:
            raise ScenarioError(f"{path}: trace header missing fields {missing}")
        prev_t = None
        for idx, row in enumerate(reader):
            try:
                vals = {f: float(row[f]) for f in TRACE_FIELDS}
            except (TypeError, ValueError):
                raise ScenarioError(f"{path}: malformed record {idx}") from None
            if prev_t is not None and vals["t"] <= prev_t:
                raise ScenarioError(
                    f"{path}: non-monotone timestamp at record {idx} "
                    f"({vals['t']} after {prev_t})"
                )
            prev_t = vals["t"]
            states.append(VehicleState(
                t=vals["t"], x=vals["x"], y=vals["y"], heading=vals["heading"],
                speed=vals["speed"], wheel_speed=vals["speed"] * RPM_PER_MPS,
                throttle=vals["throttle"], brake=vals["brake"],
                steering=vals["steering"], lateral_offset=0.0, oob_fraction=0.0,
            ))
    return states


def label_replay(name: str, states) -> TestResult:
    """Verdict for a replayed trace: faults only, no lane oracle available."""
    for st in states:
        if not all(map(math.isfinite, (st.x, st.y, st.heading, st.speed))):
            return TestResult(name, Outcome.FAIL, Reason.NUMERIC_FAULT,
                              0.0, len(states) * DT, len(states))
    return TestResult(name, Outcome.PASS, Reason.NONE, 0.0,
                      states[-1].t if states else 0.0, len(states))
