"""Data models for the D2D/LTE coexistence simulator."""

import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Dict, Any, Optional, List, Tuple

import numpy as np


class FrameType(str, Enum):
    """Reference (I) or differential (P/B collapsed) frame."""
    I = 'I'
    DIFF = 'DIFF'

    @property
    def code(self) -> str:
        """Single-letter form used in CSV files."""
        return 'I' if self is FrameType.I else 'D'

    @classmethod
    def from_code(cls, code: str) -> 'FrameType':
        code = code.strip().upper()
        if code == 'I':
            return cls.I
        if code in ('D', 'DIFF', 'P', 'B'):
            return cls.DIFF
        raise ValueError(f"Unknown frame type code: {code!r}")


class StrategyKind(str, Enum):
    FP = 'FP'
    FDTP = 'FDTP'


class Mode(str, Enum):
    """D2D access mode: LOW while reference frames are on air, HIGH otherwise."""
    LOW = 'LOW'
    HIGH = 'HIGH'


# ---------------------------------------------------------------- stream

@dataclass(frozen=True)
class StreamConfig:
    """
    Deterministic GoP-structured video source.

    Attributes:
        gop_size: frames per GoP
        gop_pattern: string over {I,P,B} of length gop_size starting with I.
            None means "I" followed by gop_size-1 "P".
        frame_rate: frames per second
        packets_per_i: transport stream packets per I-frame
        packets_per_diff: transport stream packets per P/B frame
        duration: stream length in seconds
        packet_size: bytes per transport stream packet
    """
    gop_size: int = 128
    gop_pattern: Optional[str] = None
    frame_rate: float = 30.0
    packets_per_i: int = 30
    packets_per_diff: int = 5
    duration: float = 60.0
    packet_size: int = 188

    @property
    def pattern(self) -> str:
        if self.gop_pattern is None:
            return 'I' + 'P' * (self.gop_size - 1)
        return self.gop_pattern

    @property
    def total_frames(self) -> int:
        return int(math.floor(round(self.duration * self.frame_rate, 9)))


@dataclass(frozen=True)
class PacketEntry:
    packet_index: int
    frame_index: int
    frame_type: FrameType
    release_time: float


@dataclass
class PacketMap:
    """Ordered mapping of transport stream packets to frames."""
    entries: List[PacketEntry]
    packet_size: int = 188
    gop_size: int = 128

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def total_frames(self) -> int:
        return self.entries[-1].frame_index + 1 if self.entries else 0

    @property
    def n_gops(self) -> int:
        return -(-self.total_frames // self.gop_size)

    def frame_types(self) -> List[FrameType]:
        """Frame type per frame index."""
        types = [FrameType.DIFF] * self.total_frames
        for e in self.entries:
            types[e.frame_index] = e.frame_type
        return types

    def frame_ranges(self) -> Dict[int, Tuple[int, int]]:
        """frame_index -> (first packet_index, last packet_index)"""
        ranges: Dict[int, Tuple[int, int]] = {}
        for e in self.entries:
            first, _ = ranges.get(e.frame_index, (e.packet_index, e.packet_index))
            ranges[e.frame_index] = (first, e.packet_index)
        return ranges


@dataclass(frozen=True)
class PreambleEvent:
    """Uplink preamble announcing the type of the frames that follow."""
    time: float
    frame_type: FrameType


# ---------------------------------------------------------------- radio

@dataclass(frozen=True)
class Topology:
    """Link distances in meters."""
    ue_enb_dist: float = 200.0
    d2d_pair_dist: float = 10.0
    d2dtx_enb_dist: float = 200.0
    ue_d2drx_dist: float = 200.0


@dataclass(frozen=True)
class FadingTrace:
    """
    Scalar fading gain trace in dB, sampled at a fixed period.

    The trace loops cyclically, so any slot index maps to a sample.
    """
    samples: Tuple[float, ...]
    sample_period: float
    label: str

    @classmethod
    def flat(cls, sample_period: float = 0.001) -> 'FadingTrace':
        """Unit-gain (0 dB) trace."""
        return cls(samples=(0.0,), sample_period=sample_period, label='flat')

    def __len__(self) -> int:
        return len(self.samples)

    def sample_index(self, slot: int, slot_len: float, offset: int = 0) -> int:
        return (int(slot * slot_len / self.sample_period + 1e-9) + offset) % len(self.samples)

    def gain_at(self, slot: int, slot_len: float, offset: int = 0) -> float:
        return self.samples[self.sample_index(slot, slot_len, offset)]

    def gains_for_slots(self, n_slots: int, slot_len: float, offset: int = 0) -> np.ndarray:
        """Vector of gains for slots 0..n_slots-1."""
        samples = np.asarray(self.samples, dtype=float)
        idx = (np.floor(np.arange(n_slots) * slot_len / self.sample_period + 1e-9).astype(np.int64) + offset) % len(samples)
        return samples[idx]


@dataclass(frozen=True)
class LinkBudget:
    """Received power of one link in one slot."""
    tx_power: float
    path_loss: float
    fading_gain: float = 0.0

    @property
    def rx_power(self) -> float:
        return self.tx_power - self.path_loss + self.fading_gain


# ---------------------------------------------------------------- mac

@dataclass(frozen=True)
class McsRow:
    mcs_index: int
    spectral_eff: float
    sinr_threshold: float
    pdus_per_subframe: int


@dataclass(frozen=True)
class CqiReport:
    slot_measured: int
    cqi: int


@dataclass(frozen=True)
class TxPlan:
    slot: int
    mcs: int
    pdu_packet_indices: Tuple[int, ...]


# ---------------------------------------------------------------- d2d

@dataclass(frozen=True)
class StrategyConfig:
    """
    D2D access strategy.

    FP uses rho in every slot. FDTP uses rho_i while in LOW mode (reference
    frames on air) and rho_d in HIGH mode.
    """
    kind: StrategyKind = StrategyKind.FDTP
    rho: float = 0.5
    rho_i: float = 0.0
    rho_d: float = 0.5
    power_dbm: float = 5.0
    dci_delay: int = 1
    d2d_threshold_db: float = 5.0


@dataclass(frozen=True)
class AccessMode:
    mode: Mode = Mode.HIGH
    since_slot: int = 0
    last_event_slot: int = -1


@dataclass(frozen=True)
class D2dSlotDecision:
    slot: int
    transmitted: bool
    succeeded: bool


# ---------------------------------------------------------------- quality

@dataclass(frozen=True)
class VideoRecord:
    packet_index: int
    slot: int
    delivered: bool


@dataclass
class LossTrace:
    """Per-slot outcome of video PDUs and D2D transmissions."""
    video: List[VideoRecord]
    d2d: List[D2dSlotDecision]
    total_slots: int


@dataclass(frozen=True)
class FrameStatus:
    frame_index: int
    frame_type: FrameType
    directly_damaged: bool
    effectively_damaged: bool


@dataclass(frozen=True)
class GopDamage:
    gop_index: int
    damaged_frames: int
    i_frame_lost: bool


@dataclass
class QualityReport:
    """
    Video quality and D2D throughput of one run or of a group of seeds.

    p_det is the intact-frame fraction standing in for the object detection
    ratio, hence metric='proxy'.
    """
    p_det: float
    d2d_rel_throughput: Optional[float]
    efficiency: Optional[float]
    per_gop: List[GopDamage] = field(default_factory=list)
    metric: str = 'proxy'
    seeds: List[int] = field(default_factory=list)
    stddev: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        extra = data.pop('extra')
        data.update(extra)
        return data


__all__ = [
    'FrameType', 'StrategyKind', 'Mode',
    'StreamConfig', 'PacketEntry', 'PacketMap', 'PreambleEvent',
    'Topology', 'FadingTrace', 'LinkBudget',
    'McsRow', 'CqiReport', 'TxPlan',
    'StrategyConfig', 'AccessMode', 'D2dSlotDecision',
    'VideoRecord', 'LossTrace', 'FrameStatus', 'GopDamage', 'QualityReport',
]
