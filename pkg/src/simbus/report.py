"""Run report: delimited results file, stderr summary, and figures.

The report is a CSV with one record per scenario. When figure rendering is
enabled, a per-scenario PNG (trajectory over the lane plus the oracle trace)
and a summary PNG land in a directory next to the CSV.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

from .errors import SimbusError
from .road import RoadCurve
from .scenario import Outcome, Reason, TestResult, VehicleState

REPORT_FIELDS = ("name", "outcome", "reason", "max_oob_fraction", "sim_duration", "ticks")


class ReportError(SimbusError):
    """Report file cannot be written or read back."""


def write_report(results, path) -> None:
    """Write one CSV record per scenario result."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_FIELDS)
            for r in results:
                writer.writerow([
                    r.scenario, r.outcome.value, r.reason.value,
                    repr(r.max_oob_fraction), repr(r.sim_duration), r.ticks,
                ])
    except OSError as exc:
        raise ReportError(f"cannot write report {path}: {exc}") from exc


def read_report(path) -> list[TestResult]:
    """Parse a report file back into result records."""
    path = Path(path)
    results = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f in REPORT_FIELDS if f not in (reader.fieldnames or ())]
        if missing:
            raise ReportError(f"{path}: report header missing {missing}")
        for row in reader:
            results.append(TestResult(
                scenario=row["name"],
                outcome=Outcome(row["outcome"]),
                reason=Reason(row["reason"]),
                max_oob_fraction=float(row["max_oob_fraction"]),
                sim_duration=float(row["sim_duration"]),
                ticks=int(row["ticks"]),
            ))
    return results


def print_summary(results, stream=None) -> None:
    stream = stream if stream is not None else sys.stderr
    for r in results:
        if r.outcome is Outcome.PASS:
            stream.write(f"  {r.scenario}: pass\n")
        else:
            stream.write(
                f"  {r.scenario}: fail ({r.reason.value}, "
                f"max_oob={r.max_oob_fraction:.3f})\n"
            )
    passed = sum(1 for r in results if r.outcome is Outcome.PASS)
    stream.write(f"{passed} passed, {len(results) - passed} failed\n")
    stream.flush()


def _lane_edges(road: RoadCurve, half_width: float, step: float = 1.0):
    left_x, left_y, right_x, right_y, cx, cy = [], [], [], [], [], []
    s = 0.0
    while True:
        x, y = road.point_at(s)
        tx, ty = road.tangent_at(s)
        nx, ny = -ty, tx
        cx.append(x)
        cy.append(y)
        left_x.append(x + nx * half_width)
        left_y.append(y + ny * half_width)
        right_x.append(x - nx * half_width)
        right_y.append(y - ny * half_width)
        if s >= road.total_length:
            break
        s = min(s + step, road.total_length)
    return (cx, cy), (left_x, left_y), (right_x, right_y)


def render_scenario_figure(spec, states: list[VehicleState], result: TestResult, out_path) -> Path:
    """Render the trajectory-vs-lane and oracle-trace panels to one PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    road = RoadCurve(spec.waypoints)
    (cx, cy), left, right = _lane_edges(road, spec.lane_width / 2.0)

    fig, (ax_map, ax_tr) = plt.subplots(1, 2, figsize=(11, 4.5))
    ax_map.plot(cx, cy, "--", color="0.6", linewidth=0.8, label="centerline")
    ax_map.plot(*left, color="0.3", linewidth=1.0)
    ax_map.plot(*right, color="0.3", linewidth=1.0)
    color = "tab:green" if result.outcome is Outcome.PASS else "tab:red"
    ax_map.plot([s.x for s in states], [s.y for s in states], color=color,
                linewidth=1.4, label="vehicle")
    ax_map.set_aspect("equal", adjustable="datalim")
    ax_map.set_xlabel("x [m]")
    ax_map.set_ylabel("y [m]")
    ax_map.set_title(f"{spec.name}: {result.outcome.value}")
    ax_map.legend(loc="best", fontsize=8)

    ts = [s.t for s in states]
    ax_tr.plot(ts, [s.lateral_offset for s in states], color="tab:blue",
               linewidth=1.0, label="lateral offset [m]")
    ax_tr.plot(ts, [s.oob_fraction for s in states], color="tab:orange",
               linewidth=1.0, label="out-of-bound fraction")
    ax_tr.axhline(spec.oob, color="tab:red", linewidth=0.8, linestyle=":",
                  label=f"tolerance {spec.oob}")
    ax_tr.set_xlabel("t [s]")
    ax_tr.legend(loc="best", fontsize=8)
    ax_tr.set_title("lane-keeping oracle")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def render_summary_figure(results, thresholds: dict[str, float], out_path) -> Path:
    """Bar chart of each scenario's worst out-of-bound fraction vs its tolerance."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = [r.scenario for r in results]
    values = [r.max_oob_fraction for r in results]
    colors = ["tab:green" if r.outcome is Outcome.PASS else "tab:red" for r in results]

    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(names) + 2), 4))
    bars = ax.bar(range(len(names)), values, color=colors)
    for i, r in enumerate(results):
        thr = thresholds.get(r.scenario)
        if thr is not None:
            ax.plot([i - 0.4, i + 0.4], [thr, thr], color="black", linewidth=1.2)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("max out-of-bound fraction")
    ax.set_title("scenario outcomes (black mark = tolerance)")
    ax.bar_label(bars, fmt="%.2f", fontsize=7)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path
