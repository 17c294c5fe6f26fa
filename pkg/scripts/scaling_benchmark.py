#!/usr/bin/env python3
"""Timing sweep over agent counts: generation, initialization, and step loop.

Usage: python scripts/scaling_benchmark.py [--days 90]
"""

import argparse
import tempfile
import time
from pathlib import Path

from careflow.engine import Simulation
from careflow.scenario import load_scenario
from careflow.synth import SynthSpec, generate_synthetic_scenario

parser = argparse.ArgumentParser()
parser.add_argument("--days", type=int, default=90)
args = parser.parse_args()

print(f"{'agents':>10} {'gen s':>7} {'init s':>7} {'run s':>7} {'days/s':>8}")
for population in (25_000, 100_000, 400_000):
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "scenario"
        t0 = time.perf_counter()
        generate_synthetic_scenario(SynthSpec(population=population), out)
        t1 = time.perf_counter()
        scenario = load_scenario(out)
        sim = Simulation(scenario, days=args.days)
        t2 = time.perf_counter()
        sim.run()
        t3 = time.perf_counter()
        print(f"{population:>10,} {t1 - t0:>7.1f} {t2 - t1:>7.1f} "
              f"{t3 - t2:>7.1f} {args.days / (t3 - t2):>8.1f}")
