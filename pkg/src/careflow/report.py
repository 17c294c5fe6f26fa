"""Run artifact files: event log, census series, LOS stats, movement counts."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import RunReport
from .transitions import CATEGORIES

EVENT_HEADER = "day,agent_id,event,from,to,detail"


def write_run(report: RunReport, out_dir: Path | str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "events.csv", "w") as fh:
        fh.write(EVENT_HEADER + "\n")
        fh.write("\n".join(report.events))
        if report.events:
            fh.write("\n")

    with open(out / "census.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "facility_id", "occupied", "occupied_icu"])
        for day in range(report.days):
            for j, fid in enumerate(report.facility_ids):
                if report.categories[j] == "COMMUNITY":
                    continue
                writer.writerow([day, fid, int(report.census[day, j]),
                                 int(report.census_icu[day, j])])

    with open(out / "los_stats.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["facility_id", "category", "admissions",
                         "mean_los", "sd_los"])
        for j, fid in enumerate(report.facility_ids):
            if report.categories[j] == "COMMUNITY":
                continue
            n = int(report.los_count[j])
            if n == 0:
                writer.writerow([fid, report.categories[j], 0, "", ""])
                continue
            mean = report.los_sum[j] / n
            var = max(report.los_sumsq[j] / n - mean * mean, 0.0)
            writer.writerow([fid, report.categories[j], n,
                             f"{mean:.6f}", f"{np.sqrt(var):.6f}"])

    with open(out / "moves.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["from_category", "to_category", "count"])
        for i, src in enumerate(CATEGORIES):
            for j, dst in enumerate(CATEGORIES):
                writer.writerow([src, dst, int(report.moves[i, j])])

    summary = {
        "seed": report.seed,
        "n_agents": report.n_agents,
        "days": report.days,
        "facilities": [
            {
                "facility_id": fid,
                "category": report.categories[j],
                "beds_nonicu": int(report.beds_nonicu[j]),
                "beds_icu": int(report.beds_icu[j]),
                "placeholders": int(report.placeholders[j]),
                "init_census": int(report.init_census[j]),
                "init_census_icu": int(report.init_census_icu[j]),
                "admits": int(report.admits[j]),
                "departures": int(report.departures[j]),
                "deaths": int(report.deaths[j]),
            }
            for j, fid in enumerate(report.facility_ids)
        ],
        "daily": [
            {
                "day": s.day,
                "admissions": s.admissions,
                "discharges_to_community": s.discharges_to_community,
                "deaths": s.deaths,
                "turned_away": s.turned_away,
                "fully_turned_away": s.fully_turned_away,
            }
            for s in report.summaries
        ],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    return out


@dataclass
class RunArtifacts:
    """Run outputs reloaded from disk for post-hoc validation."""

    days: int
    n_agents: int
    seed: int
    facility_ids: list[int]
    categories: dict[int, str]
    census: dict[int, np.ndarray]
    census_icu: dict[int, np.ndarray]
    los_stats: dict[int, tuple[int, float, float]]
    moves: np.ndarray
    init_census: dict[int, int]
    placeholders: dict[int, int]


def read_run(run_dir: Path | str) -> RunArtifacts:
    run = Path(run_dir)
    summary = json.loads((run / "summary.json").read_text())
    days = summary["days"]
    categories = {f["facility_id"]: f["category"] for f in summary["facilities"]}
    init_census = {f["facility_id"]: f["init_census"]
                   for f in summary["facilities"]}
    placeholders = {f["facility_id"]: f["placeholders"]
                    for f in summary["facilities"]}
    fids = [f["facility_id"] for f in summary["facilities"]
            if f["category"] != "COMMUNITY"]

    census = {fid: np.zeros(days, dtype=np.int64) for fid in fids}
    census_icu = {fid: np.zeros(days, dtype=np.int64) for fid in fids}
    with open(run / "census.csv", newline="") as fh:
        for rec in csv.DictReader(fh):
            fid = int(rec["facility_id"])
            census[fid][int(rec["day"])] = int(rec["occupied"])
            census_icu[fid][int(rec["day"])] = int(rec["occupied_icu"])

    los_stats: dict[int, tuple[int, float, float]] = {}
    with open(run / "los_stats.csv", newline="") as fh:
        for rec in csv.DictReader(fh):
            n = int(rec["admissions"])
            if n == 0:
                los_stats[int(rec["facility_id"])] = (0, 0.0, 0.0)
            else:
                los_stats[int(rec["facility_id"])] = (
                    n, float(rec["mean_los"]), float(rec["sd_los"]))

    moves = np.zeros((4, 4))
    with open(run / "moves.csv", newline="") as fh:
        for rec in csv.DictReader(fh):
            i = CATEGORIES.index(rec["from_category"])
            j = CATEGORIES.index(rec["to_category"])
            moves[i, j] = float(rec["count"])

    return RunArtifacts(
        days=days, n_agents=summary["n_agents"], seed=summary["seed"],
        facility_ids=fids, categories=categories, census=census,
        census_icu=census_icu, los_stats=los_stats, moves=moves,
        init_census=init_census, placeholders=placeholders)
