"""Deterministic agent-based simulation of patient movement among short-term
acute care hospitals, long-term acute care hospitals, nursing homes, and the
community."""

__version__ = "0.1.0"

from .engine import Simulation  # noqa: F401
from .scenario import Parameters, Scenario, load_scenario  # noqa: F401
from .synth import SynthSpec, generate_synthetic_scenario  # noqa: F401
