"""Agents package: the three searches of the channel-allocation optimiser."""

from .direct_search_agent import DirectSearchAgent, direct_search
from .swarm_agent import SwarmAgent, SwarmSettings, pso
from .annealing_agent import AnnealingAgent, AnnealingSettings, simulated_annealing

__all__ = [
    "DirectSearchAgent",
    "SwarmAgent",
    "SwarmSettings",
    "AnnealingAgent",
    "AnnealingSettings",
    "direct_search",
    "pso",
    "simulated_annealing",
]
