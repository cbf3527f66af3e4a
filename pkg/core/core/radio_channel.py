"""
Radio channel: EARFCN mapping, Friis path loss, thermal noise, fading traces
and per-slot SINR at the eNodeB and at the D2D receiver.
"""

import math
import logging
from functools import lru_cache
from typing import Dict, List, Tuple

import pandas as pd

from ..errors import ConfigError, DomainError
from ..models import FadingTrace, LinkBudget, Topology
from ..utils import db_to_mw

logger = logging.getLogger(__name__)

# band: (F_UL_low MHz, N_offs_UL, first EARFCN, last EARFCN)
UPLINK_BANDS: Dict[int, Tuple[float, int, int, int]] = {
    1: (1920.0, 18000, 18000, 18599),
    2: (1850.0, 18600, 18600, 19199),
    3: (1710.0, 19200, 19200, 19949),
    4: (1710.0, 19950, 19950, 20399),
    5: (824.0, 20400, 20400, 20649),
    6: (830.0, 20650, 20650, 20749),
    7: (2500.0, 20750, 20750, 21449),
    8: (880.0, 21450, 21450, 21799),
}

THERMAL_NOISE_DBM_HZ = -174.0

# Links, each reads the fading trace at its own cyclic offset (fraction of trace length)
LINKS = ('ue_enb', 'd2d_enb', 'd2d_pair', 'ue_d2drx')
LINK_OFFSETS = {'ue_enb': 0.0, 'd2d_enb': 0.25, 'd2d_pair': 0.5, 'ue_d2drx': 0.75}


def earfcn_to_uplink_freq(earfcn: int) -> float:
    """Uplink carrier in MHz: F = F_low + 0.1 * (N - N_offset)."""
    for f_low, n_offset, first, last in UPLINK_BANDS.values():
        if first <= earfcn <= last:
            return f_low + 0.1 * (earfcn - n_offset)
    raise ConfigError(f"Uplink EARFCN {earfcn} is outside the supported bands")


def friis_path_loss(dist: float, freq: float) -> float:
    """Free-space loss in dB for dist in meters and freq in MHz."""
    if dist <= 0 or freq <= 0:
        raise DomainError(f"distance and frequency must be positive, got {dist} m, {freq} MHz")
    return 32.44 + 20.0 * math.log10(dist / 1000.0) + 20.0 * math.log10(freq)


def noise_floor(bandwidth: float, noise_figure: float) -> float:
    """Thermal noise power in dBm over bandwidth (Hz)."""
    if bandwidth <= 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth) + noise_figure


def _sinr(signal: LinkBudget, interferer_active: bool, interferer: LinkBudget, noise: float) -> float:
    denominator = db_to_mw(noise)
    if interferer_active:
        denominator += db_to_mw(interferer.rx_power)
    return signal.rx_power - 10.0 * math.log10(denominator)


def sinr_at_enb(slot: int, ue_budget: LinkBudget, d2d_active: bool, d2d_budget: LinkBudget, noise: float) -> float:
    """SINR (dB) of the video UE at the eNodeB, D2D transmitter as interferer."""
    return _sinr(ue_budget, d2d_active, d2d_budget, noise)


def sinr_at_d2drx(slot: int, d2d_budget: LinkBudget, lte_ue_active: bool, ue_budget: LinkBudget, noise: float) -> float:
    """SINR (dB) of the D2D link at its receiver, video UE as interferer."""
    return _sinr(d2d_budget, lte_ue_active, ue_budget, noise)


@lru_cache(maxsize=16)
def load_fading_trace(path: str, label: str) -> FadingTrace:
    """
    Read a `t_s,gain_db` CSV; the sample period comes from the first two rows.
    """
    df = pd.read_csv(path)
    if list(df.columns[:2]) != ['t_s', 'gain_db']:
        raise ConfigError(f"{path}: expected header t_s,gain_db, got {list(df.columns)}")
    if df.empty:
        raise ConfigError(f"{path}: fading trace is empty")
    if len(df) > 1:
        period = float(df['t_s'].iloc[1] - df['t_s'].iloc[0])
    else:
        period = 0.001
    if period <= 0:
        raise ConfigError(f"{path}: non-increasing time column")
    logger.debug("Loaded fading trace %s (%d samples, %.4f s)", path, len(df), period)
    return FadingTrace(samples=tuple(float(g) for g in df['gain_db']), sample_period=period, label=label)


class ChannelModel:
    """
    Link budgets of the four links for every slot of one simulation.

    Path losses are fixed by the topology; the fading gain of each link is the
    shared trace read at that link's cyclic offset. Read-only after
    construction.
    """

    def __init__(self, topology: Topology, freq_mhz: float, ue_tx_power: float, d2d_tx_power: float,
                 fading: FadingTrace, n_slots: int, slot_len: float,
                 enb_noise: float, d2d_noise: float):
        self.topology = topology
        self.freq_mhz = freq_mhz
        self.ue_tx_power = ue_tx_power
        self.d2d_tx_power = d2d_tx_power
        self.fading = fading
        self.enb_noise = enb_noise
        self.d2d_noise = d2d_noise

        self.path_loss = {
            'ue_enb': friis_path_loss(topology.ue_enb_dist, freq_mhz),
            'd2d_enb': friis_path_loss(topology.d2dtx_enb_dist, freq_mhz),
            'd2d_pair': friis_path_loss(topology.d2d_pair_dist, freq_mhz),
            'ue_d2drx': friis_path_loss(topology.ue_d2drx_dist, freq_mhz),
        }
        self.tx_power = {
            'ue_enb': ue_tx_power,
            'd2d_enb': d2d_tx_power,
            'd2d_pair': d2d_tx_power,
            'ue_d2drx': ue_tx_power,
        }
        self._gains: Dict[str, List[float]] = {
            link: fading.gains_for_slots(n_slots, slot_len, int(LINK_OFFSETS[link] * len(fading))).tolist()
            for link in LINKS
        }

    def budget(self, link: str, slot: int) -> LinkBudget:
        return LinkBudget(self.tx_power[link], self.path_loss[link], self._gains[link][slot])

    def enb_sinr(self, slot: int, d2d_active: bool) -> float:
        return sinr_at_enb(slot, self.budget('ue_enb', slot), d2d_active, self.budget('d2d_enb', slot), self.enb_noise)

    def d2drx_sinr(self, slot: int, lte_ue_active: bool) -> float:
        return sinr_at_d2drx(slot, self.budget('d2d_pair', slot), lte_ue_active, self.budget('ue_d2drx', slot), self.d2d_noise)
