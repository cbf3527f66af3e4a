"""
Sweep specifications, grid expansion, result tables and FP/FDTP comparison.

Everything here is pure: running the jobs, caching and progress display
live in the experiment runner.
"""

import os
import json
import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..config import SimConfig, config_from_dict, config_hash, config_to_dict, load_config, with_override
from ..errors import ConfigError
from ..utils import summarize
from .sim_engine import Simulation

logger = logging.getLogger(__name__)

DEFAULT_RHO_GRID = [round(0.1 * k, 1) for k in range(1, 11)]
DEFAULT_POWER_GRID = list(range(-5, 16, 2))
DEFAULT_N_SEEDS = 20

RESULT_COLUMNS = [
    'strategy', 'rho', 'rho_i', 'rho_d', 'power_dbm', 'fading_label', 'seed',
    'd2d_throughput', 'p_det', 'efficiency', 'status',
    'p_det_std', 'p_det_ci95', 'd2d_throughput_std', 'runs', 'result_hash', 'config_hash', 'error',
]
SORT_COLUMNS = ['strategy', 'fading_label', 'power_dbm', 'rho', 'rho_i', 'rho_d']
MEAN_SEED = 'mean'
NO_COMPARISON = 'no-comparison'

# config key -> result column
AXIS_COLUMNS = {
    'strategy.rho': 'rho',
    'strategy.rho_i': 'rho_i',
    'strategy.rho_d': 'rho_d',
    'strategy.power_dbm': 'power_dbm',
    'fading.label': 'fading_label',
    'strategy.kind': 'strategy',
}


@dataclass
class SweepSpec:
    """
    A base config, one or two swept keys and a seed list.

    outputs may name 'csv' (all rows), 'json' (mean rows) and
    'contour_prefix' (one pivot CSV per metric when axis2 is set).
    """
    base: SimConfig
    axis1: Tuple[str, List[Any]]
    axis2: Optional[Tuple[str, List[Any]]] = None
    seeds: List[int] = field(default_factory=lambda: list(range(DEFAULT_N_SEEDS)))
    outputs: Dict[str, str] = field(default_factory=dict)
    name: str = 'sweep'


@dataclass(frozen=True)
class SweepJob:
    """One grid point and the seeds still to run for it."""
    config: SimConfig
    seeds: Tuple[int, ...]
    config_hash: str


def default_values(key: str) -> List[Any]:
    column = AXIS_COLUMNS.get(key)
    if column in ('rho', 'rho_i', 'rho_d'):
        return list(DEFAULT_RHO_GRID)
    if column == 'power_dbm':
        return list(DEFAULT_POWER_GRID)
    raise ConfigError(f"No default grid for axis {key!r}; give explicit values")


def _parse_axis(data: Any, where: str) -> Tuple[str, List[Any]]:
    if not isinstance(data, dict) or 'key' not in data:
        raise ConfigError(f"{where} must be an object with a 'key'")
    unknown = set(data) - {'key', 'values'}
    if unknown:
        raise ConfigError(f"Unknown {where} key(s): {sorted(unknown)}")
    values = data.get('values') or default_values(data['key'])
    return data['key'], list(values)


def sweep_spec_from_dict(data: Dict[str, Any], base_dir: str = '.') -> SweepSpec:
    allowed = {'name', 'base', 'base_config', 'axis1', 'axis2', 'seeds', 'n_seeds', 'outputs'}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"Unknown sweep key(s): {sorted(unknown)}")
    if 'axis1' not in data:
        raise ConfigError("Sweep needs axis1")

    base = SimConfig()
    if 'base_config' in data:
        base = load_config(os.path.join(base_dir, data['base_config']))
    if 'base' in data:
        merged = config_to_dict(base)
        for section, values in data['base'].items():
            if isinstance(values, dict) and isinstance(merged.get(section), dict):
                merged[section].update(values)
            else:
                merged[section] = values
        base = config_from_dict(merged)

    seeds = data.get('seeds')
    if seeds is None:
        seeds = list(range(int(data.get('n_seeds', DEFAULT_N_SEEDS))))
    if not seeds:
        raise ConfigError("Sweep needs at least one seed")

    spec = SweepSpec(
        base=base,
        axis1=_parse_axis(data['axis1'], 'axis1'),
        axis2=_parse_axis(data['axis2'], 'axis2') if data.get('axis2') else None,
        seeds=[int(s) for s in seeds],
        outputs=dict(data.get('outputs', {})),
        name=data.get('name', 'sweep'),
    )
    expand_grid(spec)
    return spec


def load_sweep_spec(path: str) -> SweepSpec:
    if not os.path.exists(path):
        raise ConfigError(f"Sweep file not found: {path}")
    with open(path) as f:
        data = json.load(f)
    return sweep_spec_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


def expand_grid(spec: SweepSpec) -> List[SimConfig]:
    """One config per (axis1 value, axis2 value); axis keys are validated here."""
    key1, values1 = spec.axis1
    configs = []
    for v1 in values1:
        config = with_override(spec.base, key1, v1)
        if spec.axis2 is None:
            configs.append(config)
            continue
        key2, values2 = spec.axis2
        for v2 in values2:
            configs.append(with_override(config, key2, v2))
    return configs


def _row_base(config: SimConfig, seed: Any, chash: str) -> Dict[str, Any]:
    s = config.strategy
    return {
        'strategy': s.kind.value,
        'rho': s.rho,
        'rho_i': s.rho_i,
        'rho_d': s.rho_d,
        'power_dbm': s.power_dbm,
        'fading_label': config.fading.trace_label,
        'seed': seed,
        'config_hash': chash,
    }


def run_job(job: SweepJob) -> List[Dict[str, Any]]:
    """
    Run every seed of one grid point; failures become status='failed' rows.

    Module level so it can be shipped to worker processes.
    """
    rows = []
    try:
        simulation = Simulation(job.config)
    except Exception as e:
        logger.error("Grid point %s rejected: %s", job.config_hash[:12], e)
        return [dict(_row_base(job.config, seed, job.config_hash), status='failed',
                     error=f"{type(e).__name__}: {e}") for seed in job.seeds]

    for seed in job.seeds:
        row = _row_base(job.config, seed, job.config_hash)
        try:
            result = simulation.run(seed)
        except Exception as e:
            logger.error("Run %s/%d aborted: %s", job.config_hash[:12], seed, e)
            row.update(status='failed', error=f"{type(e).__name__}: {e}")
        else:
            q = result.quality
            row.update(
                status='completed',
                d2d_throughput=q.d2d_rel_throughput,
                p_det=q.p_det,
                efficiency=q.efficiency,
                result_hash=result.result_hash,
            )
        rows.append(row)
    return rows


def make_jobs(spec: SweepSpec, completed: Optional[Dict[str, Sequence[int]]] = None) -> List[SweepJob]:
    """Jobs for the grid, skipping (config_hash, seed) pairs already completed."""
    completed = completed or {}
    jobs = []
    for config in expand_grid(spec):
        chash = config_hash(config)
        done = set(completed.get(chash, ()))
        seeds = tuple(s for s in spec.seeds if s not in done)
        if seeds:
            jobs.append(SweepJob(config=config, seeds=seeds, config_hash=chash))
    return jobs


def mean_rows(rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """One mean-over-seeds row per grid point, from its completed rows."""
    groups: Dict[str, List[Dict[str, Any]]] = {}
    for row in rows:
        if row.get('seed') == MEAN_SEED:
            continue
        groups.setdefault(row['config_hash'], []).append(row)

    means = []
    for chash, group in groups.items():
        ok = [r for r in group if r.get('status') == 'completed']
        mean = {k: group[0][k] for k in ('strategy', 'rho', 'rho_i', 'rho_d', 'power_dbm', 'fading_label', 'config_hash')}
        mean['seed'] = MEAN_SEED
        if not ok:
            mean.update(status='failed', runs=0, error='no completed runs')
            means.append(mean)
            continue
        p = summarize([r['p_det'] for r in ok])
        t = summarize([r['d2d_throughput'] for r in ok])
        mean.update(
            status='completed' if len(ok) == len(group) else 'partial',
            p_det=p['mean'],
            p_det_std=p['stddev'],
            p_det_ci95=p['ci95'],
            d2d_throughput=t['mean'],
            d2d_throughput_std=t['stddev'],
            efficiency=p['mean'] / (1.0 - t['mean']) if t['mean'] < 1.0 else None,
            runs=len(ok),
        )
        means.append(mean)
    return means


def results_table(rows: Sequence[Dict[str, Any]], with_means: bool = True) -> pd.DataFrame:
    """
    Raw rows plus one mean row per grid point, in a fixed order that does not
    depend on job completion order.
    """
    rows = [r for r in rows if r.get('seed') != MEAN_SEED]
    all_rows = list(rows) + (mean_rows(rows) if with_means else [])
    df = pd.DataFrame(all_rows, columns=RESULT_COLUMNS)
    df['_is_mean'] = df['seed'].astype(str) == MEAN_SEED
    df['_seed_order'] = pd.to_numeric(df['seed'], errors='coerce').fillna(-1)
    df = df.sort_values(SORT_COLUMNS + ['_is_mean', '_seed_order'], kind='mergesort')
    return df.drop(columns=['_is_mean', '_seed_order']).reset_index(drop=True)


def load_results(path: str) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={'seed': str})
    missing = {'strategy', 'fading_label', 'seed', 'd2d_throughput', 'p_det'} - set(df.columns)
    if missing:
        raise ConfigError(f"{path}: missing columns {sorted(missing)}")
    return df


def _mean_curve(df: pd.DataFrame) -> pd.DataFrame:
    """Mean rows of a results table (computed when the table has none)."""
    is_mean = df['seed'].astype(str) == MEAN_SEED
    if is_mean.any():
        means = df[is_mean].copy()
    else:
        raw = df[df.get('status', 'completed') == 'completed'] if 'status' in df else df
        means = raw.groupby(['strategy', 'rho', 'rho_i', 'rho_d', 'power_dbm', 'fading_label'], as_index=False).agg(
            p_det=('p_det', 'mean'), d2d_throughput=('d2d_throughput', 'mean'),
            p_det_std=('p_det', 'std'), runs=('p_det', 'size'))
        means['p_det_ci95'] = 1.96 * means['p_det_std'].fillna(0.0) / np.sqrt(means['runs'])
    if 'p_det_ci95' not in means:
        means['p_det_ci95'] = 0.0
    return means.dropna(subset=['p_det', 'd2d_throughput'])


def compare_strategies(fp_results: pd.DataFrame, fdtp_results: pd.DataFrame) -> pd.DataFrame:
    """
    Pair every FP point with the FDTP curve at the same D2D throughput.

    Curves are built per (fading_label, power_dbm) and the FDTP mean curve is
    interpolated piecewise-linearly in throughput. FP points outside its
    throughput range, or without an FDTP curve at their power, are marked
    no-comparison.
    """
    fp = _mean_curve(fp_results)
    fdtp = _mean_curve(fdtp_results)

    fp_labels, fdtp_labels = set(fp['fading_label']), set(fdtp['fading_label'])
    if fp_labels != fdtp_labels:
        logger.warning("Fading labels differ: FP %s, FDTP %s", sorted(fp_labels), sorted(fdtp_labels))

    rows = []
    for (label, power), fp_group in fp.groupby(['fading_label', 'power_dbm'], sort=True):
        curve = fdtp[(fdtp['fading_label'] == label) & np.isclose(fdtp['power_dbm'].astype(float), float(power))]
        curve = curve.groupby('d2d_throughput', as_index=False).agg(
            p_det=('p_det', 'mean'), p_det_ci95=('p_det_ci95', 'mean')).sort_values('d2d_throughput')
        xs = curve['d2d_throughput'].to_numpy(dtype=float)

        for fp_row in fp_group.sort_values('d2d_throughput').itertuples(index=False):
            row = {
                'fading_label': label,
                'rho': fp_row.rho,
                'power_dbm': fp_row.power_dbm,
                'd2d_throughput': fp_row.d2d_throughput,
                'p_det_fp': fp_row.p_det,
            }
            x = float(fp_row.d2d_throughput)
            if len(xs) == 0 or x < xs[0] - 1e-12 or x > xs[-1] + 1e-12:
                row.update(p_det_fdtp=math.nan, delta_p_det=math.nan, delta_ci95=math.nan, status=NO_COMPARISON)
            else:
                fdtp_p = float(np.interp(x, xs, curve['p_det'].to_numpy(dtype=float)))
                fdtp_ci = float(np.interp(x, xs, curve['p_det_ci95'].fillna(0.0).to_numpy(dtype=float)))
                fp_ci = float(fp_row.p_det_ci95) if not pd.isna(fp_row.p_det_ci95) else 0.0
                row.update(
                    p_det_fdtp=fdtp_p,
                    delta_p_det=fdtp_p - float(fp_row.p_det),
                    delta_ci95=math.hypot(fp_ci, fdtp_ci),
                    status='ok',
                )
            rows.append(row)

    return pd.DataFrame(rows, columns=[
        'fading_label', 'rho', 'power_dbm', 'd2d_throughput', 'p_det_fp', 'p_det_fdtp',
        'delta_p_det', 'delta_ci95', 'status',
    ])


def contour_grid(df: pd.DataFrame, axis1: str, axis2: str, value: str) -> pd.DataFrame:
    """axis1 x axis2 pivot of one metric from the mean rows."""
    means = df[df['seed'].astype(str) == MEAN_SEED]
    col1, col2 = AXIS_COLUMNS.get(axis1, axis1), AXIS_COLUMNS.get(axis2, axis2)
    return means.pivot_table(index=col1, columns=col2, values=value, aggfunc='mean')


def summary_json(df: pd.DataFrame, spec: SweepSpec) -> Dict[str, Any]:
    means = df[df['seed'].astype(str) == MEAN_SEED]
    points = json.loads(means.to_json(orient='records'))
    return {
        'name': spec.name,
        'metric': 'proxy',
        'seeds': spec.seeds,
        'axis1': spec.axis1[0],
        'axis2': spec.axis2[0] if spec.axis2 else None,
        'points': points,
    }


def write_outputs(df: pd.DataFrame, spec: SweepSpec, csv_path: Optional[str] = None) -> List[str]:
    """Write the CSV, JSON and contour files named by the sweep; returns the paths written."""
    written = []
    csv_path = csv_path or spec.outputs.get('csv')
    for path in (csv_path, spec.outputs.get('json'), spec.outputs.get('contour_prefix')):
        if path and os.path.dirname(path):
            os.makedirs(os.path.dirname(path), exist_ok=True)
    if csv_path:
        df.to_csv(csv_path, index=False)
        written.append(csv_path)
    if spec.outputs.get('json'):
        with open(spec.outputs['json'], 'w') as f:
            json.dump(summary_json(df, spec), f, indent=2)
        written.append(spec.outputs['json'])
    prefix = spec.outputs.get('contour_prefix')
    if prefix and spec.axis2:
        for metric in ('p_det', 'd2d_throughput', 'efficiency'):
            path = f"{prefix}_{metric}.csv"
            contour_grid(df, spec.axis1[0], spec.axis2[0], metric).to_csv(path)
            written.append(path)
    return written
