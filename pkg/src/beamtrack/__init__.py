"""Per-cluster estimation and statistical beamforming for time-varying massive MIMO.

Simulation library and CLI covering channel generation, hybrid beamformer
construction (DFT analog stage + generalized eigenbeamformer digital stages),
fast-time effective-channel estimation, slow-time beam tracking, and
Monte-Carlo link-level evaluation.
"""

__version__ = "0.1.0"

from .config import ClusterConfig, ScenarioConfig, table_iv_config
from .harness import RunResult, run_experiment, run_realization, sweep

__all__ = [
    "__version__",
    "ClusterConfig",
    "ScenarioConfig",
    "table_iv_config",
    "RunResult",
    "run_experiment",
    "run_realization",
    "sweep",
]
