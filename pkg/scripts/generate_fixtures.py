#!/usr/bin/env python3
"""
Fixture generator for the bundled data/ files.

Writes:
    data/mcs_table_v1.csv        - default MCS table (formula below)
    data/fading_low_speed.csv    - EPA-like power gain trace, 3 km/h
    data/fading_high_speed.csv   - EPA-like power gain trace, 10 km/h

The fading traces are wideband power gains of the seven-tap EPA profile.
Every tap is a deterministic sum-of-sinusoids Rayleigh process (no random
phases, so the files are bit-stable), the taps are combined with their
linear EPA powers and the result is normalized to unit mean power.

Usage:
    python scripts/generate_fixtures.py [--out-dir data]
"""

import os
import sys
import argparse

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.core.lte_mac import McsTable, save_mcs_table

EPA_TAP_POWERS_DB = (0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8)
N_SINUSOIDS = 16
SPEED_OF_LIGHT = 299792458.0
CARRIER_HZ = 1930e6  # uplink EARFCN 18100
TRACE_SECONDS = 10.0
SAMPLE_PERIOD = 0.001

SPEEDS_KMPH = {
    'low_speed': 3.0,
    'high_speed': 10.0,
}


def doppler_hz(speed_kmph: float, carrier_hz: float = CARRIER_HZ) -> float:
    """Maximum Doppler shift v * f_c / c."""
    return (speed_kmph / 3.6) * carrier_hz / SPEED_OF_LIGHT


def _frac(x):
    return x - np.floor(x)


def tap_power(t: np.ndarray, fd: float, tap: int) -> np.ndarray:
    """|h(t)|^2 of one sum-of-sinusoids Rayleigh tap (unit mean)."""
    n = np.arange(N_SINUSOIDS)
    alpha = 2 * np.pi * (n + (tap + 1) / 8) / N_SINUSOIDS
    phi = 2 * np.pi * _frac((n + 1) * (tap + 1) * 0.618034)
    psi = 2 * np.pi * _frac((n + 1) * (tap + 1) * 0.414214)
    wt = 2 * np.pi * fd * t[:, None]
    i = np.cos(wt * np.cos(alpha) + phi).sum(axis=1) / np.sqrt(N_SINUSOIDS)
    q = np.cos(wt * np.sin(alpha) + psi).sum(axis=1) / np.sqrt(N_SINUSOIDS)
    return i ** 2 + q ** 2


def epa_gain_db(speed_kmph: float) -> tuple:
    """Return (t, gain_db) for one trace."""
    n_samples = int(round(TRACE_SECONDS / SAMPLE_PERIOD))
    t = np.arange(n_samples) * SAMPLE_PERIOD
    fd = doppler_hz(speed_kmph)

    weights = 10 ** (np.array(EPA_TAP_POWERS_DB) / 10)
    total = np.zeros(n_samples)
    for tap, w in enumerate(weights):
        total += w * tap_power(t, fd, tap)
    total /= total.mean()
    return t, 10 * np.log10(total)


def write_trace(path: str, t: np.ndarray, gain_db: np.ndarray):
    with open(path, 'w') as f:
        f.write("t_s,gain_db\n")
        for ti, gi in zip(t, gain_db):
            f.write(f"{ti:.3f},{gi:.6f}\n")


def main():
    parser = argparse.ArgumentParser(description="Regenerate bundled simulation fixtures")
    parser.add_argument('--out-dir', default=os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data'))
    args = parser.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)

    save_mcs_table(McsTable.from_formula(), os.path.join(args.out_dir, 'mcs_table_v1.csv'))
    print(f"✓ mcs_table_v1.csv")

    for label, speed in SPEEDS_KMPH.items():
        t, gain = epa_gain_db(speed)
        path = os.path.join(args.out_dir, f"fading_{label}.csv")
        write_trace(path, t, gain)
        print(f"✓ fading_{label}.csv  ({speed} km/h, f_d={doppler_hz(speed):.2f} Hz, {len(t)} samples)")
    return 0


if __name__ == '__main__':
    sys.exit(main())
