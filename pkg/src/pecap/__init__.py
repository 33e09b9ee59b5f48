"""Capacity bounds and feedback network-coding simulators for 1-to-K broadcast
packet erasure channels.

Submodules:
    field    -- GF(q) arithmetic and incremental row-space bases
    channel  -- joint reception distributions, derived probabilities, sampling
    pe_core  -- the packet-evolution transmission engine and span checks
    schemes  -- two-phase baseline, K=3 four-phase scheme, sequential scheme
    bounds   -- outer/inner capacity bounds, closed forms, budget schedules
    lpsolve  -- self-contained two-phase simplex solver
    cli      -- the `pecap` command-line interface
"""

from . import bounds, channel, cli, field, lpsolve, pe_core, schemes
from .channel import ChannelSpec, make_spatially_independent, make_symmetric
from .field import GF, Basis
from .pe_core import PeSimulation, SimulationResult

__all__ = [
    "GF",
    "Basis",
    "ChannelSpec",
    "PeSimulation",
    "SimulationResult",
    "bounds",
    "channel",
    "cli",
    "field",
    "lpsolve",
    "make_spatially_independent",
    "make_symmetric",
    "pe_core",
    "schemes",
]
