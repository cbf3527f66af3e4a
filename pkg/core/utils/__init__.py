"""Small numeric helpers shared by the simulation modules."""

import math
from typing import Dict, Sequence

import numpy as np


def db_to_mw(value_dbm: float) -> float:
    """dBm -> mW"""
    return 10.0 ** (value_dbm / 10.0)


def mw_to_db(value_mw: float) -> float:
    """mW -> dBm"""
    return 10.0 * math.log10(value_mw)


def time_to_slot(t: float, slot_len: float) -> int:
    """
    First slot whose start is at or after time t.

    The quotient is rounded to 1e-9 before the ceiling so that times like
    0.006 s with 1 ms slots land on slot 6 and not slot 7.
    """
    return int(math.ceil(round(t / slot_len, 9)))


def summarize(values: Sequence[float]) -> Dict[str, float]:
    """
    Mean, sample standard deviation and 95% normal-approximation CI half width.

    A single value has stddev 0 and CI 0.
    """
    arr = np.asarray(values, dtype=float)
    n = len(arr)
    if n == 0:
        return {'mean': float('nan'), 'stddev': float('nan'), 'ci95': float('nan'), 'n': 0}
    std = float(arr.std(ddof=1)) if n > 1 else 0.0
    return {
        'mean': float(arr.mean()),
        'stddev': std,
        'ci95': 1.96 * std / math.sqrt(n),
        'n': n,
    }


__all__ = ['db_to_mw', 'mw_to_db', 'time_to_slot', 'summarize']
