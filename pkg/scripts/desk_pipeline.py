#!/usr/bin/env python3
"""Generate the reference desk scenario, run it for a year, and validate.

Usage: python scripts/desk_pipeline.py [workdir]
"""

import sys
from pathlib import Path

from careflow.cli import main

workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("desk_workdir")
scenario = workdir / "scenario"
run = workdir / "run"

main(["gen", "--out", str(scenario)])
main(["run", "--scenario", str(scenario), "--out", str(run)])
code = main(["validate", "--scenario", str(scenario), "--run", str(run)])
sys.exit(code)
