"""
Outage analysis, surface partitioning and Monte Carlo simulation for
STAR-RIS assisted power-domain NOMA downlinks.
"""

from .errors import ConfigError, InfeasibleScenarioError, PartitionError, StarNomaError
from .model import CorrelationSpec, Partition, Scenario, Side, UserSpec, preset
from .analysis import op_asymptotic, op_exact, op_twouser
from .partition import (PartitionRequest, algorithm1_nthr, algorithm2_alloc,
                        two_stage_partition, two_user_partition, uniform_partition)
from .sim import monte_carlo, sweep

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "InfeasibleScenarioError", "PartitionError", "StarNomaError",
    "CorrelationSpec", "Partition", "Scenario", "Side", "UserSpec", "preset",
    "op_asymptotic", "op_exact", "op_twouser",
    "PartitionRequest", "algorithm1_nthr", "algorithm2_alloc",
    "two_stage_partition", "two_user_partition", "uniform_partition",
    "monte_carlo", "sweep",
]
