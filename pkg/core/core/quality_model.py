"""
Video quality from a packet loss trace.

A frame is directly damaged when any of its packets is lost. Damage to a
GoP's I-frame propagates to every frame of that GoP; a damaged differential
frame only damages itself, unless chain propagation is switched on, in
which case it also damages the rest of its GoP. The detection probability
proxy is the fraction of frames left intact.
"""

import json
import logging
from typing import Dict, List, Optional, Sequence

import pandas as pd

from ..errors import ConsistencyError, DomainError, UndefinedEfficiencyError
from ..models import (
    D2dSlotDecision, FrameStatus, FrameType, GopDamage, LossTrace, PacketMap,
    QualityReport, VideoRecord,
)
from ..utils import summarize

logger = logging.getLogger(__name__)

LOSS_TRACE_COLUMNS = ['slot', 'packet_idx', 'frame_type', 'delivered']
D2D_TRACE_COLUMNS = ['slot', 'transmitted', 'succeeded']


def _delivery_by_packet(trace: LossTrace, packet_map: PacketMap) -> List[bool]:
    n = len(packet_map)
    delivered: List[Optional[bool]] = [None] * n
    for record in trace.video:
        if not 0 <= record.packet_index < n:
            raise ConsistencyError(f"packet {record.packet_index} is not in the packet map ({n} packets)")
        if delivered[record.packet_index] is not None:
            raise ConsistencyError(f"packet {record.packet_index} appears twice in the loss trace")
        delivered[record.packet_index] = record.delivered
    missing = [i for i, d in enumerate(delivered) if d is None]
    if missing:
        raise ConsistencyError(f"loss trace misses {len(missing)} packets, first {missing[0]}")
    return delivered


def propagate_damage(trace: LossTrace, packet_map: PacketMap, chain_propagation: bool = False) -> List[FrameStatus]:
    """Per-frame direct and effective damage after GoP propagation."""
    delivered = _delivery_by_packet(trace, packet_map)
    frame_types = packet_map.frame_types()
    n_frames = len(frame_types)

    direct = [False] * n_frames
    for entry in packet_map.entries:
        if not delivered[entry.packet_index]:
            direct[entry.frame_index] = True

    effective = list(direct)
    gop_size = packet_map.gop_size
    for gop_start in range(0, n_frames, gop_size):
        frames = range(gop_start, min(gop_start + gop_size, n_frames))
        if any(direct[f] and frame_types[f] is FrameType.I for f in frames):
            for f in frames:
                effective[f] = True
        elif chain_propagation:
            broken = False
            for f in frames:
                broken = broken or direct[f]
                effective[f] = broken

    return [
        FrameStatus(frame_index=f, frame_type=frame_types[f], directly_damaged=direct[f], effectively_damaged=effective[f])
        for f in range(n_frames)
    ]


def detection_probability(statuses: Sequence[FrameStatus]) -> float:
    """Intact frames over total frames."""
    if not statuses:
        raise DomainError("detection_probability needs at least one frame")
    intact = sum(1 for s in statuses if not s.effectively_damaged)
    return intact / len(statuses)


def relative_throughput(trace: LossTrace) -> float:
    """Successful D2D slots over all slots."""
    if trace.total_slots <= 0:
        raise DomainError(f"total_slots must be positive, got {trace.total_slots}")
    return sum(1 for d in trace.d2d if d.succeeded) / trace.total_slots


def efficiency(p_det: float, throughput: float) -> float:
    """p_det / (1 - throughput)"""
    if throughput >= 1.0:
        raise UndefinedEfficiencyError("efficiency is undefined at relative D2D throughput 1")
    return p_det / (1.0 - throughput)


def gop_damage(statuses: Sequence[FrameStatus], gop_size: int) -> List[GopDamage]:
    per_gop: Dict[int, List[FrameStatus]] = {}
    for s in statuses:
        per_gop.setdefault(s.frame_index // gop_size, []).append(s)
    return [
        GopDamage(
            gop_index=g,
            damaged_frames=sum(1 for s in frames if s.effectively_damaged),
            i_frame_lost=any(s.directly_damaged and s.frame_type is FrameType.I for s in frames),
        )
        for g, frames in sorted(per_gop.items())
    ]


def _safe_efficiency(p_det: float, throughput: Optional[float]) -> Optional[float]:
    if throughput is None:
        return None
    try:
        return efficiency(p_det, throughput)
    except UndefinedEfficiencyError:
        logger.warning("D2D throughput is 1, efficiency left undefined")
        return None


def evaluate(trace: LossTrace, packet_map: PacketMap, chain_propagation: bool = False,
             seed: Optional[int] = None, include_d2d: bool = True) -> QualityReport:
    """QualityReport of a single run."""
    statuses = propagate_damage(trace, packet_map, chain_propagation)
    p_det = detection_probability(statuses)
    throughput = relative_throughput(trace) if include_d2d else None
    return QualityReport(
        p_det=p_det,
        d2d_rel_throughput=throughput,
        efficiency=_safe_efficiency(p_det, throughput),
        per_gop=gop_damage(statuses, packet_map.gop_size),
        seeds=[seed] if seed is not None else [],
    )


def aggregate_reports(reports: Sequence[QualityReport]) -> QualityReport:
    """
    Mean report over seeds, carrying the sample standard deviation of p_det.

    Efficiency is computed from the mean p_det and mean throughput.
    """
    if not reports:
        raise DomainError("aggregate_reports needs at least one report")
    p = summarize([r.p_det for r in reports])
    throughputs = [r.d2d_rel_throughput for r in reports if r.d2d_rel_throughput is not None]
    t = summarize(throughputs) if throughputs else None
    mean_throughput = t['mean'] if t else None

    seeds: List[int] = []
    for r in reports:
        seeds.extend(r.seeds)
    return QualityReport(
        p_det=p['mean'],
        d2d_rel_throughput=mean_throughput,
        efficiency=_safe_efficiency(p['mean'], mean_throughput),
        per_gop=[],
        seeds=seeds,
        stddev=p['stddev'],
        extra={
            'p_det_ci95': p['ci95'],
            'd2d_rel_throughput_stddev': t['stddev'] if t else None,
            'runs': len(reports),
        },
    )


# ---------------------------------------------------------------- file formats

def save_loss_trace(trace: LossTrace, packet_map: PacketMap, path: str):
    types = {e.packet_index: e.frame_type.code for e in packet_map.entries}
    df = pd.DataFrame(
        [(r.slot, r.packet_index, types[r.packet_index], int(r.delivered)) for r in trace.video],
        columns=LOSS_TRACE_COLUMNS,
    )
    df.to_csv(path, index=False)


def save_d2d_trace(trace: LossTrace, path: str):
    df = pd.DataFrame(
        [(d.slot, int(d.transmitted), int(d.succeeded)) for d in trace.d2d],
        columns=D2D_TRACE_COLUMNS,
    )
    df.to_csv(path, index=False)


def load_loss_trace(path: str, d2d_path: Optional[str] = None) -> LossTrace:
    """
    Read a loss trace CSV and, optionally, the matching D2D decision CSV.

    total_slots is the D2D trace length when given, else one past the last
    video slot.
    """
    df = pd.read_csv(path, dtype={'frame_type': str})
    missing = set(LOSS_TRACE_COLUMNS) - set(df.columns)
    if missing:
        raise ConsistencyError(f"{path}: missing columns {sorted(missing)}")
    video = [VideoRecord(int(r.packet_idx), int(r.slot), bool(int(r.delivered))) for r in df.itertuples(index=False)]

    d2d: List[D2dSlotDecision] = []
    if d2d_path:
        ddf = pd.read_csv(d2d_path)
        d2d = [D2dSlotDecision(int(r.slot), bool(int(r.transmitted)), bool(int(r.succeeded))) for r in ddf.itertuples(index=False)]
    total_slots = len(d2d) if d2d else (max(r.slot for r in video) + 1 if video else 0)
    return LossTrace(video=video, d2d=d2d, total_slots=total_slots)


def save_report_json(report: QualityReport, path: str):
    with open(path, 'w') as f:
        json.dump(report.to_dict(), f, indent=2)
