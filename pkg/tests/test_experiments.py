#!/usr/bin/env python3
"""
Test sweep specs, grid expansion, result tables, FP/FDTP comparison and
the output files
"""

import os
import sys
import json
import math
import tempfile

import pandas as pd

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.config import config_hash
from core.errors import ConfigError
from core.core.experiments import (
    DEFAULT_POWER_GRID, DEFAULT_RHO_GRID, MEAN_SEED, NO_COMPARISON, RESULT_COLUMNS,
    compare_strategies, contour_grid, expand_grid, load_results, load_sweep_spec, make_jobs,
    results_table, run_job, summary_json, sweep_spec_from_dict, write_outputs,
)

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

TINY_BASE = {
    'stream': {'gop_size': 4, 'frame_rate': 100.0, 'packets_per_i': 4, 'packets_per_diff': 1, 'duration': 0.2},
    'strategy': {'kind': 'FDTP', 'rho_i': 0.0},
    'fading': {'label': 'flat'},
    'mac': {'report_delay': 0},
}


def tiny_spec(**overrides):
    data = {
        'name': 'tiny',
        'base': json.loads(json.dumps(TINY_BASE)),
        'axis1': {'key': 'strategy.rho_d', 'values': [0.0, 1.0]},
        'axis2': {'key': 'strategy.power_dbm', 'values': [5.0, 60.0]},
        'seeds': [0, 1],
    }
    data.update(overrides)
    return sweep_spec_from_dict(data)


def run_all(spec, completed=None):
    rows = []
    for job in make_jobs(spec, completed):
        rows.extend(run_job(job))
    return rows


def test_spec_defaults():
    spec = sweep_spec_from_dict({'axis1': {'key': 'strategy.rho'}})
    assert spec.axis1 == ('strategy.rho', DEFAULT_RHO_GRID)
    assert DEFAULT_RHO_GRID == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    assert spec.seeds == list(range(20))
    assert spec.axis2 is None

    spec = sweep_spec_from_dict({'axis1': {'key': 'strategy.rho_d'},
                                 'axis2': {'key': 'strategy.power_dbm'}, 'n_seeds': 3})
    assert spec.axis2[1] == DEFAULT_POWER_GRID == [-5, -3, -1, 1, 3, 5, 7, 9, 11, 13, 15]
    assert len(expand_grid(spec)) == 10 * 11
    assert spec.seeds == [0, 1, 2]
    print("✓ Default grids and seeds")


def test_spec_errors():
    bad = [
        {'axis1': {'key': 'strategy.rho'}, 'axes': 2},
        {'name': 'no axis'},
        {'axis1': {'key': 'strategy.rhoo', 'values': [0.1]}},
        {'axis1': {'key': 'fading.label'}},
        {'axis1': {'key': 'strategy.rho'}, 'seeds': []},
        {'axis1': {'key': 'strategy.rho'}, 'base': {'stream': {'gop_sise': 4}}},
        {'axis1': {'values': [0.1]}},
        {'axis1': {'key': 'strategy.rho', 'values': ['x']}},
    ]
    for data in bad:
        try:
            sweep_spec_from_dict(data)
            assert False, f"expected ConfigError for {data}"
        except ConfigError:
            pass
    print("✓ Malformed sweep specs rejected")


def test_shipped_sweeps_load():
    sweeps_dir = os.path.join(PROJECT_ROOT, 'sweeps')
    for name in sorted(os.listdir(sweeps_dir)):
        spec = load_sweep_spec(os.path.join(sweeps_dir, name))
        assert spec.name == name[:-len('.json')]
        assert len(spec.seeds) == 20
        assert spec.base.strategy.kind.value in name.upper()
        if 'contour' in name:
            assert spec.axis2[0] == 'strategy.power_dbm'
            assert 'contour_prefix' in spec.outputs
    print("✓ Shipped sweeps load")


def test_grid_run_shape():
    spec = tiny_spec()
    rows = run_all(spec)
    assert len(rows) == 8
    assert all(r['status'] == 'completed' for r in rows)

    df = results_table(rows)
    assert list(df.columns) == RESULT_COLUMNS
    assert len(df) == 12
    means = df[df['seed'] == MEAN_SEED]
    assert len(means) == 4
    assert (means['runs'] == 2).all()

    # D2D silent: nothing lost, nothing sent
    silent = means[means['rho_d'] == 0.0]
    assert (silent['d2d_throughput'] == 0.0).all()
    assert (silent['p_det'] == 1.0).all()

    # Saturating D2D in every DIFF slot
    loud = means[(means['rho_d'] == 1.0) & (means['power_dbm'] == 60.0)]
    assert loud['p_det'].iloc[0] < 1.0
    assert loud['d2d_throughput'].iloc[0] > 0.0
    print("✓ 2x2 grid x 2 seeds = 8 raw + 4 mean rows")


def test_endpoints_bracket_the_curve():
    base = json.loads(json.dumps(TINY_BASE))
    base['strategy'] = {'kind': 'FP', 'power_dbm': 60.0}
    spec = tiny_spec(base=base, axis1={'key': 'strategy.rho', 'values': [0.0, 0.5, 1.0]}, axis2=None)
    df = results_table(run_all(spec))
    means = df[df['seed'] == MEAN_SEED].set_index('rho')

    assert means.loc[0.0, 'd2d_throughput'] == 0.0 and means.loc[0.0, 'p_det'] == 1.0
    assert means.loc[1.0, 'd2d_throughput'] == 1.0 and means.loc[1.0, 'p_det'] == 0.0
    assert 0.0 < means.loc[0.5, 'd2d_throughput'] < 1.0
    assert 0.0 < means.loc[0.5, 'p_det'] < 1.0

    # Sorted by throughput, the curve is ordered by rho
    assert list(means.sort_values('d2d_throughput').index) == [0.0, 0.5, 1.0]
    print("✓ rho=0 and rho=1 bracket the curve")


def test_mean_rows_follow_their_group():
    df = results_table(run_all(tiny_spec(axis2=None)))
    seeds = df['seed'].astype(str).tolist()
    assert seeds == ['0', '1', MEAN_SEED, '0', '1', MEAN_SEED]
    print("✓ Mean rows close each group")


def test_order_independent_table():
    rows = run_all(tiny_spec())
    forward = results_table(rows)
    backward = results_table(list(reversed(rows)))
    assert forward.equals(backward)
    print("✓ Table order does not depend on completion order")


def test_completed_pairs_skipped():
    spec = tiny_spec()
    configs = expand_grid(spec)
    completed = {config_hash(configs[0]): [0, 1], config_hash(configs[1]): [1]}
    jobs = make_jobs(spec, completed)
    assert len(jobs) == 3
    assert [job.seeds for job in jobs] == [(0,), (0, 1), (0, 1)]
    assert make_jobs(spec, {config_hash(c): [0, 1] for c in configs}) == []
    print("✓ Completed (config, seed) pairs are skipped")


def test_failed_grid_point():
    base = json.loads(json.dumps(TINY_BASE))
    base['mac']['mcs_table'] = '/nonexistent/mcs_table.csv'
    spec = tiny_spec(base=base, axis2=None)
    rows = run_all(spec)
    assert len(rows) == 4
    assert all(r['status'] == 'failed' for r in rows)
    assert all(r['error'].startswith('ConfigError:') for r in rows)

    df = results_table(rows)
    means = df[df['seed'] == MEAN_SEED]
    assert (means['status'] == 'failed').all()
    assert (means['runs'] == 0).all()
    print("✓ Failed grid points become failed rows")


def curve(strategy, throughputs, p_dets, ci=0.01, label='low_speed'):
    return pd.DataFrame({
        'strategy': strategy,
        'rho': [round(0.1 * (k + 1), 1) for k in range(len(throughputs))],
        'power_dbm': 5.0,
        'fading_label': label,
        'seed': MEAN_SEED,
        'd2d_throughput': throughputs,
        'p_det': p_dets,
        'p_det_ci95': ci,
    })


def test_compare_identical_curves():
    fp = curve('FP', [0.1, 0.5, 0.9], [0.9, 0.6, 0.2])
    fdtp = curve('FDTP', [0.1, 0.5, 0.9], [0.9, 0.6, 0.2])
    cmp = compare_strategies(fp, fdtp)
    assert len(cmp) == 3
    assert (cmp['status'] == 'ok').all()
    assert (cmp['delta_p_det'].abs() < 1e-12).all()
    assert all(abs(v - math.hypot(0.01, 0.01)) < 1e-12 for v in cmp['delta_ci95'])
    print("✓ Identical curves compare to zero")


def test_compare_shifted_curve():
    fp = curve('FP', [0.1, 0.5, 0.9], [0.7, 0.4, 0.1])
    fdtp = curve('FDTP', [0.1, 0.5, 0.9], [0.9, 0.6, 0.3])
    cmp = compare_strategies(fp, fdtp)
    assert all(abs(v - 0.2) < 1e-12 for v in cmp['delta_p_det'])
    print("✓ FDTP curve 0.2 above FP gives delta 0.2")


def test_compare_interpolates_and_flags_range():
    fp = curve('FP', [0.25, 0.95], [0.5, 0.1])
    fdtp = curve('FDTP', [0.0, 0.9], [1.0, 0.1])
    cmp = compare_strategies(fp, fdtp)
    inside = cmp[cmp['status'] == 'ok'].iloc[0]
    assert abs(inside['p_det_fdtp'] - (1.0 - 0.25 * 0.9 / 0.9)) < 1e-12
    assert abs(inside['delta_p_det'] - 0.25) < 1e-12

    outside = cmp[cmp['d2d_throughput'] == 0.95].iloc[0]
    assert outside['status'] == NO_COMPARISON
    assert math.isnan(outside['delta_p_det'])

    other_label = compare_strategies(fp, curve('FDTP', [0.0, 1.0], [1.0, 0.0], label='high_speed'))
    assert (other_label['status'] == NO_COMPARISON).all()
    print("✓ Interpolation and out-of-range points")


def test_compare_keeps_power_levels_apart():
    throughputs = [0.1, 0.5, 0.9]
    fp = pd.concat([curve('FP', throughputs, [0.8] * 3).assign(power_dbm=-5.0),
                    curve('FP', throughputs, [0.05] * 3).assign(power_dbm=15.0),
                    curve('FP', throughputs, [0.5] * 3).assign(power_dbm=7.0)])
    fdtp = pd.concat([curve('FDTP', throughputs, [0.9] * 3).assign(power_dbm=-5.0),
                      curve('FDTP', throughputs, [0.1] * 3).assign(power_dbm=15.0)])
    cmp = compare_strategies(fp, fdtp)
    assert len(cmp) == 9

    quiet = cmp[cmp['power_dbm'] == -5.0]
    assert (quiet['status'] == 'ok').all()
    assert all(abs(v - 0.9) < 1e-12 for v in quiet['p_det_fdtp'])
    assert all(abs(v - 0.1) < 1e-12 for v in quiet['delta_p_det'])

    loud = cmp[cmp['power_dbm'] == 15.0]
    assert all(abs(v - 0.05) < 1e-12 for v in loud['delta_p_det'])

    # No FDTP curve at 7 dBm
    assert (cmp[cmp['power_dbm'] == 7.0]['status'] == NO_COMPARISON).all()
    print("✓ Each power level compared against its own FDTP curve")


def test_compare_from_raw_rows():
    rows = run_all(tiny_spec(axis2=None))
    raw = results_table(rows, with_means=False)
    cmp = compare_strategies(raw, raw)
    assert len(cmp) == 2
    assert (cmp['delta_p_det'].dropna().abs() < 1e-12).all()
    print("✓ Comparison computes means from raw rows")


def test_contour_and_outputs():
    with tempfile.TemporaryDirectory() as tmp:
        spec = tiny_spec(outputs={
            'csv': os.path.join(tmp, 'out', 'tiny.csv'),
            'json': os.path.join(tmp, 'out', 'tiny.json'),
            'contour_prefix': os.path.join(tmp, 'out', 'tiny'),
        })
        df = results_table(run_all(spec))

        grid = contour_grid(df, 'strategy.rho_d', 'strategy.power_dbm', 'p_det')
        assert grid.shape == (2, 2)
        assert list(grid.index) == [0.0, 1.0]
        assert list(grid.columns) == [5.0, 60.0]
        assert (grid.loc[0.0] == 1.0).all()

        written = write_outputs(df, spec)
        assert len(written) == 5
        for path in written:
            assert os.path.exists(path)

        reloaded = load_results(spec.outputs['csv'])
        assert len(reloaded) == 12
        assert (reloaded['seed'] == MEAN_SEED).sum() == 4

        with open(spec.outputs['json']) as f:
            summary = json.load(f)
        assert summary == json.loads(json.dumps(summary_json(df, spec)))
        assert summary['metric'] == 'proxy'
        assert len(summary['points']) == 4
        assert summary['axis2'] == 'strategy.power_dbm'
    print("✓ Contour grid and output files")


if __name__ == "__main__":
    test_spec_defaults()
    test_spec_errors()
    test_shipped_sweeps_load()
    test_grid_run_shape()
    test_endpoints_bracket_the_curve()
    test_mean_rows_follow_their_group()
    test_order_independent_table()
    test_completed_pairs_skipped()
    test_failed_grid_point()
    test_compare_identical_curves()
    test_compare_shifted_curve()
    test_compare_interpolates_and_flags_range()
    test_compare_keeps_power_levels_apart()
    test_compare_from_raw_rows()
    test_contour_and_outputs()
    print("\n✅ All experiment tests passed!")
