"""
LTE uplink link adaptation at subframe granularity.

SINR -> CQI measurement, CQI reporting with a fixed delay, CQI -> MCS
selection, PDU capacity per subframe and hard-threshold PDU decoding.
The UE announces each change of frame type with a preamble before sending
the first packet of the new type.
HARQ is off and RLC runs unacknowledged, so nothing is ever retransmitted.
"""

import math
import logging
from dataclasses import dataclass
from itertools import takewhile
from typing import Callable, List, Optional, Sequence, Tuple

import pandas as pd

from ..errors import ConfigError
from ..models import CqiReport, FrameType, McsRow, PacketEntry, PreambleEvent, TxPlan
from ..utils import time_to_slot

logger = logging.getLogger(__name__)

MCS_TABLE_COLUMNS = ['mcs', 'eff', 'sinr_thresh_db', 'pdus_per_sf']
MAX_CQI = 15
N_RB = 50
RE_PER_RB = 168
PACKET_BITS = 188 * 8

# margin (dB) -> block error probability
BlerModel = Callable[[float], float]


@dataclass(frozen=True)
class McsTable:
    rows: Tuple[McsRow, ...]

    def __post_init__(self):
        if not self.rows:
            raise ConfigError("MCS table is empty")
        for prev, row in zip(self.rows, self.rows[1:]):
            if row.sinr_threshold <= prev.sinr_threshold:
                raise ConfigError(f"MCS {row.mcs_index}: sinr_threshold must increase strictly")
            if row.pdus_per_subframe < prev.pdus_per_subframe:
                raise ConfigError(f"MCS {row.mcs_index}: pdus_per_subframe must not decrease")
        if self.rows[0].pdus_per_subframe < 1:
            raise ConfigError("MCS 0 must carry at least one PDU per subframe")
        for expected, row in enumerate(self.rows):
            if row.mcs_index != expected:
                raise ConfigError(f"MCS indices must start at 0 and be gapless, found {row.mcs_index}")

    @classmethod
    def from_formula(cls, n_rows: int = 29, eff_min: float = 0.15, eff_max: float = 5.55,
                     margin_db: float = 2.0) -> 'McsTable':
        """
        Shannon-gap table: threshold = 10*log10(2^eff - 1) + margin,
        pdus = floor(eff * 50 RB * 168 RE / 1504 bit), at least 1.
        """
        rows = []
        for i in range(n_rows):
            eff = eff_min + i * (eff_max - eff_min) / (n_rows - 1)
            threshold = 10 * math.log10(2 ** eff - 1) + margin_db
            pdus = max(1, int(eff * N_RB * RE_PER_RB / PACKET_BITS))
            rows.append(McsRow(i, round(eff, 6), round(threshold, 6), pdus))
        return cls(tuple(rows))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def max_index(self) -> int:
        return len(self.rows) - 1

    def row(self, mcs: int) -> McsRow:
        return self.rows[mcs]


def load_mcs_table(path: str) -> McsTable:
    df = pd.read_csv(path)
    missing = set(MCS_TABLE_COLUMNS) - set(df.columns)
    if missing:
        raise ConfigError(f"{path}: missing columns {sorted(missing)}")
    rows = tuple(
        McsRow(int(r.mcs), float(r.eff), float(r.sinr_thresh_db), int(r.pdus_per_sf))
        for r in df.itertuples(index=False)
    )
    return McsTable(rows)


def save_mcs_table(table: McsTable, path: str):
    with open(path, 'w') as f:
        f.write(','.join(MCS_TABLE_COLUMNS) + '\n')
        for r in table.rows:
            f.write(f"{r.mcs_index},{r.spectral_eff:.6f},{r.sinr_threshold:.6f},{r.pdus_per_subframe}\n")


def sinr_to_cqi(sinr: float) -> int:
    """cqi = clamp(floor((sinr + 6) / 2), 0, 15)"""
    return min(MAX_CQI, max(0, int(math.floor((sinr + 6.0) / 2.0))))


def cqi_to_mcs(cqi: int, table: McsTable) -> int:
    """Highest MCS whose threshold is at or below the CQI's midpoint SINR."""
    if cqi <= 0:
        return 0
    representative = 2 * cqi - 6 + 1
    best = 0
    for row in table.rows:
        if row.sinr_threshold <= representative:
            best = row.mcs_index
        else:
            break
    return best


def pdu_capacity(mcs: int, table: McsTable) -> int:
    """Whole 188-byte packets per subframe (no fragmentation or concatenation)."""
    return table.row(mcs).pdus_per_subframe


def logistic_bler(slope_db: float) -> BlerModel:
    """BLER 0.5 at the threshold, falling off with the SINR margin."""
    def bler(margin: float) -> float:
        return 1.0 / (1.0 + math.exp(margin / slope_db))
    return bler


def decode_pdu(actual_sinr: float, mcs: int, table: McsTable,
               bler: Optional[BlerModel] = None, draw: float = 0.0) -> bool:
    """
    Delivered iff actual_sinr >= threshold(mcs).

    With a BLER model the PDU is delivered iff draw >= bler(margin) instead.
    """
    threshold = table.row(mcs).sinr_threshold
    if bler is None:
        return actual_sinr >= threshold
    return draw >= bler(actual_sinr - threshold)


def schedule_subframe(backlog: Sequence[PacketEntry], mcs: int, table: McsTable,
                      slot: int = 0, slot_len: float = 0.001) -> TxPlan:
    """
    Head-of-line packets released by this slot, up to the MCS capacity.

    backlog must be ordered by release time; scheduling stops at the first
    packet not yet released.
    """
    capacity = pdu_capacity(mcs, table)
    chosen: List[int] = []
    for entry in backlog:
        if len(chosen) >= capacity or time_to_slot(entry.release_time, slot_len) > slot:
            break
        chosen.append(entry.packet_index)
    return TxPlan(slot=slot, mcs=mcs, pdu_packet_indices=tuple(chosen))


class UplinkScheduler:
    """
    Single-UE uplink scheduler with delayed CQI feedback.

    The MCS used in slot t comes from the CQI measured in slot
    t - report_delay; before any report exists CQI 0 is assumed. One
    instance per simulation.

    Frame-type changes are announced in transmission order: when the next
    packet to send is of a new type, a preamble goes out and packets of that
    type are held for dci_delay slots, until the DCI relaying the preamble
    has reached the D2D pair. A subframe never mixes frame types.
    """

    def __init__(self, table: McsTable, packets: Sequence[PacketEntry], report_delay: int = 4,
                 slot_len: float = 0.001, dci_delay: int = 0):
        if not 0 <= report_delay <= 8:
            raise ConfigError(f"report_delay must be in 0..8, got {report_delay}")
        if dci_delay < 0:
            raise ConfigError(f"dci_delay must be >= 0, got {dci_delay}")
        self.table = table
        self.packets = packets
        self.report_delay = report_delay
        self.slot_len = slot_len
        self.dci_delay = dci_delay
        self.head = 0
        self.reports: List[CqiReport] = []
        self.announced: Optional[FrameType] = None
        self.cleared_from = 0
        self.preambles: List[PreambleEvent] = []

    @property
    def backlog_empty(self) -> bool:
        return self.head >= len(self.packets)

    def report(self, slot: int, sinr: float) -> CqiReport:
        """Measure CQI in slot (reports must arrive one per slot, in order)."""
        report = CqiReport(slot_measured=slot, cqi=sinr_to_cqi(sinr))
        self.reports.append(report)
        return report

    def announce(self, slot: int) -> Optional[PreambleEvent]:
        """
        Preamble for the head-of-line packet if its type differs from the
        last one announced and it is released by slot, else None.

        Calling it again in the same slot returns None.
        """
        if self.backlog_empty:
            return None
        entry = self.packets[self.head]
        if entry.frame_type is self.announced or time_to_slot(entry.release_time, self.slot_len) > slot:
            return None
        event = PreambleEvent(time=slot * self.slot_len, frame_type=entry.frame_type)
        self.announced = entry.frame_type
        self.cleared_from = slot + self.dci_delay
        self.preambles.append(event)
        logger.debug("slot %d: %s preamble, packets held until slot %d", slot, entry.frame_type.value, self.cleared_from)
        return event

    def current_cqi(self, slot: int) -> int:
        measured = slot - self.report_delay
        if 0 <= measured < len(self.reports):
            return self.reports[measured].cqi
        return 0

    def current_mcs(self, slot: int) -> int:
        return cqi_to_mcs(self.current_cqi(slot), self.table)

    def schedule(self, slot: int) -> TxPlan:
        """Schedule this subframe and pop the chosen packets from the backlog."""
        self.announce(slot)
        mcs = self.current_mcs(slot)
        if slot < self.cleared_from:
            return TxPlan(slot=slot, mcs=mcs, pdu_packet_indices=())
        window = self.packets[self.head:self.head + pdu_capacity(mcs, self.table)]
        window = list(takewhile(lambda e: e.frame_type is self.announced, window))
        plan = schedule_subframe(window, mcs, self.table, slot, self.slot_len)
        self.head += len(plan.pdu_packet_indices)
        return plan
