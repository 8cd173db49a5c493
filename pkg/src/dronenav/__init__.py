"""dronenav: a deterministic indoor drone navigation loop.

A kinematic simulator over metric floor plans, a finite-state-machine
controller with a strict decision contract, pluggable pilots (live
vision-language model, rule-based oracle, transcript replay), a wire-protocol
simulator server, and a benchmark harness with report and plot emission.
"""

__version__ = "0.1.0"

from . import fsm, geometry, harness, percept, pilot, sim, simserve, world

__all__ = ["fsm", "geometry", "harness", "percept", "pilot", "sim", "simserve", "world"]
