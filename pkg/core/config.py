"""
Simulation configuration.

A SimConfig is a tree of frozen dataclasses. JSON files mirror that tree
key for key; unknown keys are rejected with their dotted path so typos
never fall back to defaults silently. Missing keys take the defaults
below.
"""

import os
import json
import math
import hashlib
import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Union, get_args, get_origin

from .errors import ConfigError
from .models import StrategyConfig, StrategyKind, StreamConfig, Topology
from .core.stream_model import validate_stream_config
from .core.cognitive_d2d import validate_strategy
from .core.radio_channel import earfcn_to_uplink_freq

PACKAGE_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FADING_LABELS = ('low', 'high', 'flat')


def data_dir() -> str:
    """Bundled fixtures directory (D2DSIM_DATA_DIR overrides)."""
    return os.environ.get('D2DSIM_DATA_DIR') or os.path.join(PACKAGE_ROOT, 'data')


@dataclass(frozen=True)
class RadioConfig:
    earfcn: int = 18100
    bandwidth_hz: float = 10e6
    noise_figure_db: float = 5.0
    d2d_noise_figure_db: float = 5.0
    ue_tx_power_dbm: float = 23.0
    # Downlink only, kept for the record
    enb_tx_power_dbm: float = 25.0


@dataclass(frozen=True)
class FadingConfig:
    label: str = 'low'
    low_trace: Optional[str] = None
    high_trace: Optional[str] = None

    def trace_path(self) -> Optional[str]:
        """Path of the selected trace, None for flat fading."""
        if self.label == 'flat':
            return None
        if self.label == 'low':
            return self.low_trace or os.path.join(data_dir(), 'fading_low_speed.csv')
        return self.high_trace or os.path.join(data_dir(), 'fading_high_speed.csv')

    @property
    def trace_label(self) -> str:
        return {'low': 'low_speed', 'high': 'high_speed'}.get(self.label, self.label)


@dataclass(frozen=True)
class MacConfig:
    mcs_table: Optional[str] = None
    report_delay: int = 4
    # None keeps the hard SINR threshold
    bler_slope_db: Optional[float] = None

    def mcs_table_path(self) -> str:
        return self.mcs_table or os.path.join(data_dir(), 'mcs_table_v1.csv')


@dataclass(frozen=True)
class QualityConfig:
    chain_propagation: bool = False


@dataclass(frozen=True)
class SimConfig:
    stream: StreamConfig = field(default_factory=StreamConfig)
    topology: Topology = field(default_factory=Topology)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    fading: FadingConfig = field(default_factory=FadingConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    quality: QualityConfig = field(default_factory=QualityConfig)
    slot_len: float = 0.001
    seed: int = 0


def _build(cls, data: Dict[str, Any], path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"Unknown config key(s): {', '.join(f'{path}{k}' for k in unknown)}")

    kwargs = {}
    for name, value in data.items():
        f = known[name]
        if dataclasses.is_dataclass(f.default_factory if f.default_factory is not dataclasses.MISSING else None):
            kwargs[name] = _build(f.default_factory, value, f"{path}{name}.")
        elif cls is StrategyConfig and name == 'kind':
            try:
                kwargs[name] = StrategyKind(str(value).upper())
            except ValueError:
                raise ConfigError(f"{path}kind must be FP or FDTP, got {value!r}")
        else:
            kwargs[name] = _typed(value, f.type, f"{path}{name}")
    return cls(**kwargs)


def _typed(value: Any, ftype: Any, where: str) -> Any:
    """value checked against its field type; ints widen to float, integral floats narrow to int."""
    if get_origin(ftype) is Union and type(None) in get_args(ftype):
        if value is None:
            return None
        ftype = next(a for a in get_args(ftype) if a is not type(None))

    if ftype is bool:
        ok = isinstance(value, bool)
    elif ftype in (int, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
        ok = ok and (ftype is float or float(value).is_integer())
    elif ftype is str:
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{where} must be {getattr(ftype, '__name__', ftype)}, got {value!r}")
    return ftype(value) if ftype in (int, float) else value


def config_from_dict(data: Dict[str, Any]) -> SimConfig:
    """Strict conversion of a (possibly partial) JSON tree to a SimConfig."""
    return _build(SimConfig, data, '')


def config_to_dict(config: SimConfig) -> Dict[str, Any]:
    def convert(value):
        if isinstance(value, Enum):
            return value.value
        if isinstance(value, dict):
            return {k: convert(v) for k, v in value.items()}
        return value
    return convert(dataclasses.asdict(config))


def load_config(path: str) -> SimConfig:
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})")
    return config_from_dict(data)


def with_override(config: SimConfig, key: str, value: Any) -> SimConfig:
    """Copy of config with one dotted key replaced, e.g. 'strategy.rho_d'."""
    data = config_to_dict(config)
    node = data
    parts = key.split('.')
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"Unknown config key: {key}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"Unknown config key: {key}")
    node[parts[-1]] = value
    return config_from_dict(data)


def config_hash(config: SimConfig) -> str:
    """SHA-256 of the config without its seed."""
    data = config_to_dict(config)
    data.pop('seed', None)
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def validate_config(config: SimConfig):
    """Raise ConfigError for anything that would fail after slot 0."""
    validate_stream_config(config.stream)
    validate_strategy(config.strategy)
    earfcn_to_uplink_freq(config.radio.earfcn)

    for name, value in dataclasses.asdict(config.topology).items():
        if value <= 0:
            raise ConfigError(f"topology.{name} must be > 0, got {value}")
    if config.slot_len <= 0:
        raise ConfigError(f"slot_len must be > 0, got {config.slot_len}")
    if config.radio.bandwidth_hz <= 0:
        raise ConfigError(f"radio.bandwidth_hz must be > 0, got {config.radio.bandwidth_hz}")
    if config.fading.label not in FADING_LABELS:
        raise ConfigError(f"fading.label must be one of {FADING_LABELS}, got {config.fading.label!r}")
    if not 0 <= config.mac.report_delay <= 8:
        raise ConfigError(f"mac.report_delay must be in 0..8, got {config.mac.report_delay}")
    if config.mac.bler_slope_db is not None and config.mac.bler_slope_db <= 0:
        raise ConfigError(f"mac.bler_slope_db must be > 0, got {config.mac.bler_slope_db}")

    for path in (config.fading.trace_path(), config.mac.mcs_table_path()):
        if path is not None and not os.path.exists(path):
            raise ConfigError(f"Referenced file not found: {path}")
