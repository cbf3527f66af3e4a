"""
Video source model: GoP-structured frames packetized into fixed-size
transport stream packets, and the frame-type preambles announced ahead of
each change of frame type.
"""

import logging
from typing import List, Optional

import pandas as pd

from ..errors import ConfigError
from ..models import FrameType, PacketEntry, PacketMap, PreambleEvent, StreamConfig

logger = logging.getLogger(__name__)

PACKET_MAP_COLUMNS = ['packet_idx', 'frame_idx', 'frame_type', 'release_time_s']
GOP_SYMBOLS = frozenset('IPB')


def validate_stream_config(cfg: StreamConfig):
    """Raise ConfigError if cfg violates the StreamConfig invariants."""
    if cfg.gop_size < 1:
        raise ConfigError(f"gop_size must be >= 1, got {cfg.gop_size}")
    if cfg.frame_rate <= 0:
        raise ConfigError(f"frame_rate must be > 0, got {cfg.frame_rate}")
    if cfg.duration <= 0:
        raise ConfigError(f"duration must be > 0, got {cfg.duration}")
    if not (cfg.packets_per_i >= cfg.packets_per_diff >= 1):
        raise ConfigError(
            f"need packets_per_i >= packets_per_diff >= 1, got {cfg.packets_per_i}, {cfg.packets_per_diff}")
    if cfg.packet_size < 1:
        raise ConfigError(f"packet_size must be >= 1, got {cfg.packet_size}")

    pattern = cfg.pattern
    if len(pattern) != cfg.gop_size:
        raise ConfigError(f"gop_pattern length {len(pattern)} != gop_size {cfg.gop_size}")
    illegal = set(pattern) - GOP_SYMBOLS
    if illegal:
        raise ConfigError(f"gop_pattern has illegal symbols {sorted(illegal)}")
    if pattern[0] != 'I':
        raise ConfigError(f"gop_pattern must start with I, got {pattern[:8]!r}")
    if pattern.count('I') != 1:
        raise ConfigError("gop_pattern must contain exactly one I")


def packet_count(cfg: StreamConfig) -> int:
    """Closed-form number of packets, partial trailing GoP included."""
    pattern = cfg.pattern
    per_gop = cfg.packets_per_i + (cfg.gop_size - 1) * cfg.packets_per_diff
    whole, rest = divmod(cfg.total_frames, cfg.gop_size)
    tail = sum(cfg.packets_per_i if s == 'I' else cfg.packets_per_diff for s in pattern[:rest])
    return whole * per_gop + tail


def build_packet_map(cfg: StreamConfig) -> PacketMap:
    """
    Packetize the stream.

    Frame f is released at f / frame_rate and all its packets share that
    release time. P and B frames both become FrameType.DIFF.
    """
    validate_stream_config(cfg)
    pattern = cfg.pattern

    entries: List[PacketEntry] = []
    for frame in range(cfg.total_frames):
        is_ref = pattern[frame % cfg.gop_size] == 'I'
        frame_type = FrameType.I if is_ref else FrameType.DIFF
        n_packets = cfg.packets_per_i if is_ref else cfg.packets_per_diff
        release = frame / cfg.frame_rate
        for _ in range(n_packets):
            entries.append(PacketEntry(len(entries), frame, frame_type, release))

    logger.debug("Packetized %d frames into %d packets", cfg.total_frames, len(entries))
    return PacketMap(entries=entries, packet_size=cfg.packet_size, gop_size=cfg.gop_size)


def preamble_schedule(packet_map: PacketMap) -> List[PreambleEvent]:
    """
    One event at t=0 and one wherever the next released packet changes type.
    """
    if not packet_map.entries:
        raise ConfigError("preamble_schedule needs a non-empty packet map")

    events: List[PreambleEvent] = []
    previous: Optional[FrameType] = None
    for entry in packet_map.entries:
        if entry.frame_type != previous:
            time = 0.0 if previous is None else entry.release_time
            events.append(PreambleEvent(time=time, frame_type=entry.frame_type))
            previous = entry.frame_type
    return events


def save_packet_map(packet_map: PacketMap, path: str):
    df = pd.DataFrame(
        [(e.packet_index, e.frame_index, e.frame_type.code, e.release_time) for e in packet_map.entries],
        columns=PACKET_MAP_COLUMNS,
    )
    df.to_csv(path, index=False)


def load_packet_map(path: str, gop_size: Optional[int] = None, packet_size: int = 188) -> PacketMap:
    """
    Read a packet map CSV.

    Without gop_size, the GoP size is the distance between the first two
    I-frames (or the whole stream when it has a single I-frame).
    """
    df = pd.read_csv(path, dtype={'frame_type': str})
    missing = set(PACKET_MAP_COLUMNS) - set(df.columns)
    if missing:
        raise ConfigError(f"{path}: missing columns {sorted(missing)}")

    entries = [
        PacketEntry(int(row.packet_idx), int(row.frame_idx), FrameType.from_code(row.frame_type), float(row.release_time_s))
        for row in df.itertuples(index=False)
    ]
    for expected, entry in enumerate(entries):
        if entry.packet_index != expected:
            raise ConfigError(f"{path}: packet indices must be gapless, found {entry.packet_index} at row {expected}")

    if gop_size is None:
        i_frames = sorted({e.frame_index for e in entries if e.frame_type is FrameType.I})
        total = entries[-1].frame_index + 1 if entries else 1
        gop_size = i_frames[1] - i_frames[0] if len(i_frames) > 1 else total
    return PacketMap(entries=entries, packet_size=packet_size, gop_size=gop_size)
