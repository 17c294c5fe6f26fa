"""Command-line driver: gen, distances, run, validate, replay-check."""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from .engine import Simulation
from .geography import write_distance_csv
from .report import read_run, write_run
from .scenario import DISTANCE_FILES, load_scenario
from .synth import SynthSpec, generate_synthetic_scenario
from .transitions import FourByFour
from .validation import (determinism_check, icu_steady_state, pattern1_los,
                         pattern2_capacity, pattern3_flows, write_summary)


SCENARIO_ENV = "CAREFLOW_SCENARIO"


def _scenario_flag(sub):
    default = os.environ.get(SCENARIO_ENV)
    sub.add_argument("--scenario", required=default is None, default=default,
                     help=f"scenario directory (default: ${SCENARIO_ENV})")


def _add_run_flags(sub):
    _scenario_flag(sub)
    sub.add_argument("--days", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--agents", type=int, default=None)


def cmd_gen(args) -> int:
    spec = SynthSpec.from_toml(args.spec) if args.spec else SynthSpec()
    if args.seed is not None:
        spec.seed = args.seed
    for name in ("counties", "hospitals", "ltachs", "nursing_homes",
                 "population"):
        value = getattr(args, name)
        if value is not None:
            setattr(spec, name, value)
    out = generate_synthetic_scenario(spec, args.out)
    print(f"scenario written to {out}")
    return 0


def cmd_distances(args) -> int:
    scenario = load_scenario(args.scenario)
    out = Path(args.out) if args.out else scenario.root
    for category, filename in DISTANCE_FILES.items():
        write_distance_csv(scenario.distances[category], out / filename)
        print(f"wrote {out / filename}")
    return 0


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    sim = Simulation(scenario, n_agents=args.agents, days=args.days,
                     seed=args.seed)
    started = time.perf_counter()
    report = sim.run()
    elapsed = time.perf_counter() - started
    out = write_run(report, args.out)
    total_admissions = int(report.admits.sum())
    print(f"ran {report.days} days, {report.n_agents} agents, "
          f"seed {report.seed}: {total_admissions} admissions, "
          f"{int(report.deaths.sum())} deaths in {elapsed:.1f}s -> {out}",
          file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    params = scenario.parameters
    run = read_run(args.run)
    truth = scenario.ground_truth
    if truth is None:
        print("scenario has no ground_truth.json sidecar", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else Path(args.run)
    out.mkdir(parents=True, exist_ok=True)

    expected_los = {int(k): (v[0], v[1])
                    for k, v in truth["expected_los"].items()}
    expected_census = {int(k): v for k, v in truth["expected_census"].items()}
    targets = FourByFour(matrix=np.array(truth["four_by_four"]))

    p1 = pattern1_los(run, expected_los, params)
    p2 = pattern2_capacity(run, expected_census, params)
    p3 = pattern3_flows(run, targets, params)
    icu = icu_steady_state(run, params)
    p1.write_csv(out / "pattern1.csv")
    p2.write_csv(out / "pattern2.csv")
    p3.write_csv(out / "pattern3.csv")
    ok = write_summary([p1, p2, p3], [icu], out / "validation_summary.csv")
    for report in (p1, p2, p3):
        status = "pass" if report.passed else "FAIL"
        print(f"pattern {report.pattern}: {status}")
    print(f"icu steady state: {'pass' if icu.passed else 'FAIL'} "
          f"(drift {icu.modeled:+.4f})")
    print(f"summary -> {out / 'validation_summary.csv'}")
    return 0 if ok else 1


def cmd_replay_check(args) -> int:
    scenario = load_scenario(args.scenario)

    def run_once(out_dir: Path):
        sim = Simulation(scenario, n_agents=args.agents, days=args.days,
                         seed=args.seed)
        write_run(sim.run(), out_dir)

    identical, detail = determinism_check(
        run_once, compare_files=("events.csv", "census.csv", "moves.csv"))
    if identical:
        print("replay check: identical outputs")
        return 0
    print(f"replay check FAILED: {detail}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="careflow",
        description="Agent-based patient-movement simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic scenario")
    gen.add_argument("--spec", default=None, help="TOML spec file")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=None)
    for name in ("counties", "hospitals", "ltachs", "nursing-homes",
                 "population"):
        gen.add_argument(f"--{name}", dest=name.replace("-", "_"),
                         type=int, default=None)
    gen.set_defaults(func=cmd_gen)

    dist = sub.add_parser("distances", help="precompute distance matrices")
    _scenario_flag(dist)
    dist.add_argument("--out", default=None)
    dist.set_defaults(func=cmd_distances)

    run = sub.add_parser("run", help="simulate a scenario")
    _add_run_flags(run)
    run.add_argument("--out", required=True)
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="pattern checks on a finished run")
    _scenario_flag(val)
    val.add_argument("--run", required=True)
    val.add_argument("--out", default=None)
    val.set_defaults(func=cmd_validate)

    replay = sub.add_parser("replay-check",
                            help="verify two runs are byte-identical")
    _add_run_flags(replay)
    replay.set_defaults(func=cmd_replay_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
