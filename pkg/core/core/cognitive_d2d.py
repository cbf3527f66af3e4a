"""
D2D access strategies.

FP transmits in each slot with a fixed probability. FDTP follows the frame
type announced by the video UE's preambles (relayed to the D2D pair as DCI)
and uses rho_i while reference frames are on air (LOW mode) and rho_d
otherwise (HIGH mode).
"""

import logging
from typing import List, Sequence

from ..errors import ConfigError, ProtocolError
from ..models import AccessMode, FrameType, Mode, PreambleEvent, StrategyConfig, StrategyKind
from ..utils import time_to_slot

logger = logging.getLogger(__name__)


def validate_strategy(cfg: StrategyConfig):
    for name in ('rho', 'rho_i', 'rho_d'):
        value = getattr(cfg, name)
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"strategy.{name} must be in [0, 1], got {value}")
    if cfg.dci_delay < 0:
        raise ConfigError(f"strategy.dci_delay must be >= 0, got {cfg.dci_delay}")


def fp_decide(cfg: StrategyConfig, rng_draw: float) -> bool:
    """Transmit iff rng_draw < rho."""
    return rng_draw < cfg.rho


def fdtp_update_mode(state: AccessMode, event: PreambleEvent, now: int, dci_delay: int,
                     slot_len: float = 0.001) -> AccessMode:
    """
    Apply a preamble once its DCI has reached the D2D pair.

    The event takes effect at slot(event.time) + dci_delay. Before that the
    state is returned unchanged. An I preamble selects LOW, a DIFF preamble
    HIGH; repeating the current type keeps since_slot.
    """
    event_slot = time_to_slot(event.time, slot_len)
    if event_slot < state.last_event_slot:
        raise ProtocolError(
            f"preamble at slot {event_slot} arrived after one at slot {state.last_event_slot}")

    effective = event_slot + dci_delay
    if now < effective:
        return state

    mode = Mode.LOW if event.frame_type is FrameType.I else Mode.HIGH
    if mode is state.mode:
        return AccessMode(mode=state.mode, since_slot=state.since_slot, last_event_slot=event_slot)
    return AccessMode(mode=mode, since_slot=effective, last_event_slot=event_slot)


def fdtp_decide(cfg: StrategyConfig, mode: AccessMode, rng_draw: float) -> bool:
    """Transmit iff rng_draw < (rho_i in LOW mode, rho_d in HIGH mode)."""
    rho = cfg.rho_i if mode.mode is Mode.LOW else cfg.rho_d
    return rng_draw < rho


def d2d_success(transmitted: bool, sinr_d2d: float, threshold: float) -> bool:
    return transmitted and sinr_d2d >= threshold


class D2dTransmitter:
    """
    The D2D transmitter's state machine for one simulation.

    Tracks the access mode from the preambles it has been told about (both
    strategies receive the DCI; only FDTP acts on it) and turns one uniform
    draw per slot into a transmit decision.
    """

    def __init__(self, cfg: StrategyConfig, events: Sequence[PreambleEvent] = (), slot_len: float = 0.001):
        validate_strategy(cfg)
        self.cfg = cfg
        self.slot_len = slot_len
        self.pending: List[PreambleEvent] = list(events)
        self.mode = AccessMode()

    def apply_due_events(self, slot: int) -> AccessMode:
        while self.pending:
            updated = fdtp_update_mode(self.mode, self.pending[0], slot, self.cfg.dci_delay, self.slot_len)
            if updated is self.mode:
                break
            self.mode = updated
            self.pending.pop(0)
        return self.mode

    def receive(self, event: PreambleEvent):
        """Queue a preamble relayed by the eNodeB; it applies dci_delay slots after event.time."""
        if self.pending and event.time < self.pending[-1].time:
            raise ProtocolError(f"preamble at {event.time}s queued after one at {self.pending[-1].time}s")
        self.pending.append(event)

    def decide(self, rng_draw: float) -> bool:
        if self.cfg.kind is StrategyKind.FP:
            return fp_decide(self.cfg, rng_draw)
        return fdtp_decide(self.cfg, self.mode, rng_draw)
