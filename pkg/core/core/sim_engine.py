"""
Subframe-by-subframe simulation of the video uplink and the D2D pair.

Per slot: (1) the UE announces a change of frame type and due
preamble/DCI events are applied, (2) D2D access draw, (3) eNodeB SINR and
CQI measurement, (4) scheduling with the MCS from the delayed CQI, (5) PDU
and D2D decoding, (6) logging. Lost PDUs are dropped.

Everything that does not depend on the seed (packet map, channel) is built
once per Simulation; a seed only selects the random draws. Preambles go out
when the head-of-line packet changes type, so their timing follows the
backlog. They carry the same sequence of types as the release-order
schedule in self.preambles, never earlier than it.
"""

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..config import SimConfig, config_hash, validate_config
from ..errors import ConsistencyError
from ..models import (
    AccessMode, D2dSlotDecision, FadingTrace, FrameType, LossTrace, QualityReport,
    VideoRecord,
)
from ..utils import time_to_slot
from .cognitive_d2d import D2dTransmitter, d2d_success
from .lte_mac import UplinkScheduler, decode_pdu, load_mcs_table, logistic_bler
from .quality_model import evaluate
from .radio_channel import (
    ChannelModel, earfcn_to_uplink_freq, load_fading_trace, noise_floor,
)
from .stream_model import build_packet_map, preamble_schedule

logger = logging.getLogger(__name__)

# Random purposes. New purposes get new tags; existing draws never move.
PURPOSE_D2D_ACCESS = 1
PURPOSE_BLER = 2


def draw_stream(seed: int, purpose: int, n: int) -> np.ndarray:
    """
    Uniform draws for one (seed, purpose); element k is the draw of slot
    (or packet) k.

    Philox is counter based, so draw k only depends on (seed, purpose, k).
    """
    generator = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, purpose])))
    return generator.random(n)


@dataclass
class SimState:
    """Mutable state of one run between two steps."""
    simulation: 'Simulation'
    seed: int
    slot: int
    scheduler: UplinkScheduler
    transmitter: D2dTransmitter
    access_draws: np.ndarray
    bler_draws: Optional[np.ndarray]
    video: List[VideoRecord] = field(default_factory=list)
    d2d: List[D2dSlotDecision] = field(default_factory=list)
    timeline: Counter = field(default_factory=Counter)

    @property
    def done(self) -> bool:
        return self.slot >= self.simulation.total_slots

    @property
    def mode(self) -> AccessMode:
        return self.transmitter.mode


@dataclass
class SimResult:
    loss_trace: LossTrace
    quality: QualityReport
    timeline_summary: Dict[str, int]
    config_hash: str
    seed: int

    @property
    def result_hash(self) -> str:
        return loss_trace_hash(self.loss_trace)

    @property
    def delivered(self) -> int:
        return sum(1 for r in self.loss_trace.video if r.delivered)

    @property
    def lost(self) -> int:
        return len(self.loss_trace.video) - self.delivered


def loss_trace_hash(trace: LossTrace) -> str:
    h = hashlib.sha256()
    for r in trace.video:
        h.update(f"v{r.packet_index},{r.slot},{int(r.delivered)};".encode())
    for d in trace.d2d:
        h.update(f"d{d.slot},{int(d.transmitted)},{int(d.succeeded)};".encode())
    h.update(f"n{trace.total_slots}".encode())
    return h.hexdigest()


class Simulation:
    """
    One configuration, any number of seeds.

    Example:
        sim = Simulation(load_config('configs/default.json'))
        result = sim.run(seed=7)
        print(result.quality.p_det, result.quality.d2d_rel_throughput)
    """

    def __init__(self, config: SimConfig):
        validate_config(config)
        self.config = config
        self.config_hash = config_hash(config)
        slot_len = config.slot_len

        self.packet_map = build_packet_map(config.stream)
        self.preambles = preamble_schedule(self.packet_map)
        self.total_slots = max(1, time_to_slot(config.stream.duration, slot_len))
        self.mcs_table = load_mcs_table(config.mac.mcs_table_path())
        self.bler = logistic_bler(config.mac.bler_slope_db) if config.mac.bler_slope_db else None

        trace_path = config.fading.trace_path()
        if trace_path is None:
            fading = FadingTrace.flat(slot_len)
        else:
            fading = load_fading_trace(trace_path, config.fading.trace_label)

        radio = config.radio
        self.freq_mhz = earfcn_to_uplink_freq(radio.earfcn)
        self.channel = ChannelModel(
            topology=config.topology,
            freq_mhz=self.freq_mhz,
            ue_tx_power=radio.ue_tx_power_dbm,
            d2d_tx_power=config.strategy.power_dbm,
            fading=fading,
            n_slots=self.total_slots,
            slot_len=slot_len,
            enb_noise=noise_floor(radio.bandwidth_hz, radio.noise_figure_db),
            d2d_noise=noise_floor(radio.bandwidth_hz, radio.d2d_noise_figure_db),
        )
        logger.debug("Prepared simulation %s: %d packets, %d preambles, %d slots",
                     self.config_hash[:12], len(self.packet_map), len(self.preambles), self.total_slots)

    def initial_state(self, seed: Optional[int] = None) -> SimState:
        seed = self.config.seed if seed is None else seed
        return SimState(
            simulation=self,
            seed=seed,
            slot=0,
            scheduler=UplinkScheduler(self.mcs_table, self.packet_map.entries,
                                      self.config.mac.report_delay, self.config.slot_len,
                                      self.config.strategy.dci_delay),
            transmitter=D2dTransmitter(self.config.strategy, slot_len=self.config.slot_len),
            access_draws=draw_stream(seed, PURPOSE_D2D_ACCESS, self.total_slots),
            bler_draws=draw_stream(seed, PURPOSE_BLER, len(self.packet_map)) if self.bler else None,
        )

    def step(self, state: SimState) -> SimState:
        """Advance state by one subframe (in place) and return it."""
        t = state.slot

        preamble = state.scheduler.announce(t)
        if preamble is not None:
            state.transmitter.receive(preamble)
        mode = state.transmitter.apply_due_events(t)
        transmitted = state.transmitter.decide(float(state.access_draws[t]))

        enb_sinr = self.channel.enb_sinr(t, transmitted)
        state.scheduler.report(t, enb_sinr)

        plan = state.scheduler.schedule(t)
        in_flight = 'IDLE'
        for idx in plan.pdu_packet_indices:
            draw = float(state.bler_draws[idx]) if state.bler_draws is not None else 0.0
            delivered = decode_pdu(enb_sinr, plan.mcs, self.mcs_table, self.bler, draw)
            state.video.append(VideoRecord(packet_index=idx, slot=t, delivered=delivered))
            if self.packet_map.entries[idx].frame_type is FrameType.I:
                in_flight = FrameType.I.value
            elif in_flight == 'IDLE':
                in_flight = FrameType.DIFF.value

        ue_active = bool(plan.pdu_packet_indices)
        succeeded = False
        if transmitted:
            d2d_sinr = self.channel.d2drx_sinr(t, ue_active)
            succeeded = d2d_success(transmitted, d2d_sinr, self.config.strategy.d2d_threshold_db)
        state.d2d.append(D2dSlotDecision(slot=t, transmitted=transmitted, succeeded=succeeded))
        state.timeline[f"{mode.mode.value}/{in_flight}"] += 1

        state.slot += 1
        return state

    def finish(self, state: SimState) -> SimResult:
        """Close the run: unsent packets count as lost, then score it."""
        leftover = state.scheduler.packets[state.scheduler.head:]
        if leftover:
            logger.warning("%d packets still queued after %d slots, counted as lost", len(leftover), self.total_slots)
        for entry in leftover:
            state.video.append(VideoRecord(packet_index=entry.packet_index, slot=self.total_slots, delivered=False))

        trace = LossTrace(video=list(state.video), d2d=list(state.d2d), total_slots=self.total_slots)
        if len(trace.video) != len(self.packet_map):
            raise ConsistencyError(
                f"conservation violated: {len(trace.video)} outcomes for {len(self.packet_map)} packets")

        quality = evaluate(trace, self.packet_map, self.config.quality.chain_propagation, seed=state.seed)
        return SimResult(
            loss_trace=trace,
            quality=quality,
            timeline_summary=dict(sorted(state.timeline.items())),
            config_hash=self.config_hash,
            seed=state.seed,
        )

    def run(self, seed: Optional[int] = None) -> SimResult:
        state = self.initial_state(seed)
        while not state.done:
            state = self.step(state)
        result = self.finish(state)
        logger.debug("seed %d: p_det=%.4f throughput=%.4f lost=%d",
                     result.seed, result.quality.p_det, result.quality.d2d_rel_throughput, result.lost)
        return result


def run(config: SimConfig) -> SimResult:
    """Simulate config with its own seed."""
    return Simulation(config).run(config.seed)


def step(state: SimState) -> SimState:
    """Advance a state created by Simulation.initial_state by one subframe."""
    return state.simulation.step(state)
