"""Error kinds raised by the simulator."""


class SimulationError(ValueError):
    """Base class for every error the simulator raises on purpose."""


class ConfigError(SimulationError):
    """Invalid configuration: bad keys, values, GoP pattern or EARFCN."""


class DomainError(SimulationError):
    """Argument outside the mathematical domain of an operation."""


class ProtocolError(SimulationError):
    """Preamble/DCI events applied out of time order."""


class ConsistencyError(SimulationError):
    """A loss trace that does not match its packet map."""


class UndefinedEfficiencyError(SimulationError):
    """Efficiency requested at relative D2D throughput 1."""


__all__ = [
    'SimulationError', 'ConfigError', 'DomainError', 'ProtocolError',
    'ConsistencyError', 'UndefinedEfficiencyError',
]
