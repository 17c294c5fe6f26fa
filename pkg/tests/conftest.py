import time

import numpy as np
import pytest
from hypothesis import settings

from careflow.engine import Simulation
from careflow.report import write_run
from careflow.scenario import load_scenario
from careflow.synth import SynthSpec, generate_synthetic_scenario

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def desk_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    generate_synthetic_scenario(SynthSpec(), out)
    return out


@pytest.fixture(scope="session")
def desk_scenario(desk_dir):
    return load_scenario(desk_dir)


class DeskRun:
    """A full desk-scale run plus the initialization snapshot it started from."""

    def __init__(self, scenario, out_dir):
        started = time.perf_counter()
        sim = Simulation(scenario)
        self.init_locations = sim.agents.location.copy()
        self.init_age_group = sim.agents.age_group.copy()
        self.init_bed = sim.agents.bed.copy()
        self.init_leave_day = sim.agents.leave_day.copy()
        self.categories = [f.category for f in sim.roster.facilities]
        self.report = sim.run()
        self.seconds = time.perf_counter() - started
        self.out_dir = write_run(self.report, out_dir)


@pytest.fixture(scope="session")
def desk_run(desk_scenario, tmp_path_factory):
    return DeskRun(desk_scenario, tmp_path_factory.mktemp("desk_run"))


@pytest.fixture(scope="session")
def small_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    generate_synthetic_scenario(
        SynthSpec(counties=6, hospitals=4, ltachs=1, nursing_homes=8,
                  population=20_000, seed=11), out)
    return out


@pytest.fixture(scope="session")
def small_scenario(small_dir):
    return load_scenario(small_dir)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
