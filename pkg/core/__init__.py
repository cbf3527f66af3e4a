"""D2D/LTE uplink coexistence simulator with content-aware interference control."""

from .models import StreamConfig, StrategyConfig, StrategyKind, QualityReport
from .config import SimConfig, load_config, config_from_dict
from .core.concurrency import WorkerPoolManager
from .core.sim_engine import Simulation, SimResult

__all__ = [
    'StreamConfig', 'StrategyConfig', 'StrategyKind', 'QualityReport',
    'SimConfig', 'load_config', 'config_from_dict',
    'WorkerPoolManager', 'Simulation', 'SimResult',
]
