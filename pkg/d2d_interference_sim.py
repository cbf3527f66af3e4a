#!/usr/bin/env python3
"""
D2D Interference Simulator

Simulates a video uplink sharing its resources with a D2D pair, subframe by
subframe, and scores how much of the video survives for object detection
against how much the D2D pair gets through. Sweeps run many seeded
simulations over a parameter grid, cache every run in SQLite and write the
CSV/JSON tables behind the throughput/detection plots.

Usage:
    python d2d_interference_sim.py run --config configs/default.json --seed 7 --out results/
    python d2d_interference_sim.py sweep sweeps/fdtp_low_speed.json --workers 8
    python d2d_interference_sim.py compare results/fp_low.csv results/fdtp_low.csv --out delta.csv
    python d2d_interference_sim.py analyze results/loss_trace.csv --d2d-trace results/d2d_trace.csv
"""

import os
import sys
import json
import time
import asyncio
import logging
import argparse
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from tqdm import tqdm
from dotenv import load_dotenv
from rich.console import Console, Group
from rich.live import Live
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, BarColumn, TextColumn, TaskProgressColumn, TimeRemainingColumn, TimeElapsedColumn
from rich.table import Table

from core.config import SimConfig, config_hash, load_config, with_override
from core.errors import SimulationError
from core.core.concurrency import WorkerPoolManager
from core.core.experiments import (
    MEAN_SEED, SweepJob, SweepSpec, compare_strategies, expand_grid, load_results, load_sweep_spec,
    make_jobs, results_table, run_job, write_outputs,
)
from core.core.quality_model import (
    aggregate_reports, evaluate, load_loss_trace, save_d2d_trace, save_loss_trace, save_report_json,
)
from core.core.sim_engine import SimResult, Simulation
from core.core.stream_model import build_packet_map
from run_queue import RunQueue

# Load environment variables from .env file
load_dotenv()

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'configs', 'default.json')

logger = logging.getLogger('d2d_interference_sim')


class ExperimentRunner:
    """
    Runs single simulations and parameter sweeps.

    Every sweep run is recorded in a SQLite ledger keyed by
    (config_hash, seed). A run whose key is already completed is read back
    instead of simulated, so re-running a sweep only simulates what is
    missing or previously failed.

    Example usage:
        runner = ExperimentRunner('d2d_sweeps.db')
        spec = load_sweep_spec('sweeps/fdtp_low_speed.json')
        table = runner.run_sweep(spec, workers=4)
        print(runner.generate_report(table))

    Environment variables:
        D2DSIM_DB_PATH: Run ledger location (default d2d_sweeps.db)
    """

    def __init__(self, db_path: Optional[str] = None, console: Optional[Console] = None):
        self.db_path = db_path or os.environ.get('D2DSIM_DB_PATH', 'd2d_sweeps.db')
        self.ledger = RunQueue(self.db_path)
        self.console = console or Console()
        self.last_stats: Dict[str, Any] = {}

    def run_single(self, config: SimConfig, seeds: Sequence[int]) -> List[SimResult]:
        """Simulate one config for each seed (no ledger involved)."""
        simulation = Simulation(config)
        return [simulation.run(seed) for seed in seeds]

    def _cached_rows(self, spec: SweepSpec, use_cache: bool):
        """Completed rows already in the ledger, plus the (hash -> seeds) map for make_jobs."""
        cached_rows: List[Dict[str, Any]] = []
        completed: Dict[str, List[int]] = {}
        for config in expand_grid(spec):
            chash = self.ledger.add_runs(spec.name, config, spec.seeds)
            if not use_cache:
                continue
            done = self.ledger.get_completed(chash)
            for seed in spec.seeds:
                if seed in done:
                    cached_rows.append(done[seed])
                    completed.setdefault(chash, []).append(seed)
        return cached_rows, completed

    def run_sweep(self, spec: SweepSpec, workers: int = 1, use_cache: bool = True,
                  progress_bar: bool = True) -> pd.DataFrame:
        """
        Run every (grid point, seed) of a sweep and return the results table.

        Args:
            spec: Sweep to run
            workers: 1 runs in-process with a tqdm bar, more uses a process pool
            use_cache: Reuse completed runs from the ledger
            progress_bar: Show progress

        Returns:
            Raw rows plus one mean row per grid point, deterministically sorted
        """
        pool = WorkerPoolManager(workers)
        cached_rows, completed = self._cached_rows(spec, use_cache)
        pool.record_cached(len(cached_rows))
        jobs = make_jobs(spec, completed)
        n_runs = sum(len(job.seeds) for job in jobs)

        if cached_rows:
            self.console.print(f"⚡ Reusing {len(cached_rows):,} completed runs from {self.db_path}")
        self.console.print(f"📊 {n_runs:,} runs to simulate over {len(jobs)} grid points")

        if not jobs:
            rows: List[Dict[str, Any]] = []
        elif pool.workers_for(len(jobs)) == 1:
            rows = self._run_sequential(jobs, pool, progress_bar)
        else:
            rows = asyncio.run(self._run_parallel(jobs, pool, progress_bar))

        self.last_stats = pool.get_stats()
        return results_table(cached_rows + rows)

    def _record(self, pool: WorkerPoolManager, rows: List[Dict[str, Any]], run_time: float):
        ok = sum(1 for r in rows if r.get('status') == 'completed')
        if ok:
            pool.record_success(run_time, ok)
        if len(rows) - ok:
            pool.record_error(len(rows) - ok)

    def _run_sequential(self, jobs: List[SweepJob], pool: WorkerPoolManager, progress_bar: bool) -> List[Dict[str, Any]]:
        rows = []
        for job in tqdm(jobs, desc="Grid points", disable=not progress_bar):
            self.ledger.mark_processing(job.config_hash, job.seeds)
            start = time.time()
            job_rows = run_job(job)
            self._record(pool, job_rows, time.time() - start)
            self.ledger.save_rows(job_rows)
            rows.extend(job_rows)
        return rows

    async def _run_parallel(self, jobs: List[SweepJob], pool: WorkerPoolManager, progress_bar: bool) -> List[Dict[str, Any]]:
        """Grid points fan out to a process pool; results are saved as they land."""
        n_workers = pool.workers_for(len(jobs))
        results: List[Dict[str, Any]] = []

        overall_progress = Progress(
            SpinnerColumn(),
            TextColumn("[bold blue]Sweep Progress"),
            BarColumn(bar_width=40),
            TaskProgressColumn(),
            TextColumn("•"),
            TimeElapsedColumn(),
            TextColumn("•"),
            TimeRemainingColumn(),
            console=self.console,
            expand=False,
            disable=not progress_bar,
        )
        overall_task = overall_progress.add_task("Simulating", total=sum(len(j.seeds) for j in jobs))

        def make_stats_table():
            stats = pool.get_stats()
            table = Table(show_header=False, box=None, padding=(0, 2))
            table.add_row("[green]✓ Completed", f"[bold green]{stats['completed']:,}")
            table.add_row("[yellow]⚡ Cached", f"[bold yellow]{stats['cached']:,}")
            table.add_row("[red]✗ Failed", f"[bold red]{stats['failed']:,}")
            table.add_row("[blue]⏱ Avg run", f"[bold blue]{stats['avg_run_time']:.2f}s")
            table.add_row("[cyan]👷 Workers", f"[bold cyan]{stats['workers']}")
            return table

        def make_display():
            return Group(
                Panel(overall_progress, border_style="green"),
                Panel(make_stats_table(), title="[bold]Statistics[/bold]", border_style="yellow"),
            )

        queue: asyncio.Queue = asyncio.Queue()
        for job in jobs:
            await queue.put(job)
        for _ in range(n_workers):
            await queue.put(None)

        loop = asyncio.get_running_loop()

        async def worker(executor):
            while True:
                job = await queue.get()
                if job is None:
                    break
                self.ledger.mark_processing(job.config_hash, job.seeds)
                start = time.time()
                try:
                    job_rows = await loop.run_in_executor(executor, run_job, job)
                except Exception as e:
                    # Worker process died; the runs are failed, the sweep goes on
                    logger.error("Grid point %s lost: %s", job.config_hash[:12], e)
                    job_rows = [_failed_row(job, seed, e) for seed in job.seeds]
                self._record(pool, job_rows, time.time() - start)
                await self.ledger.save_rows_async(job_rows)
                results.extend(job_rows)
                overall_progress.advance(overall_task, len(job_rows))

        with ProcessPoolExecutor(max_workers=n_workers) as executor:
            with Live(make_display(), console=self.console, refresh_per_second=4,
                      transient=not progress_bar) as live:
                tasks = [asyncio.create_task(worker(executor)) for _ in range(n_workers)]
                while any(not t.done() for t in tasks):
                    live.update(make_display())
                    await asyncio.sleep(0.25)
                await asyncio.gather(*tasks)
                live.update(make_display())

        return results

    def generate_report(self, table: pd.DataFrame, output_path: Optional[str] = None) -> str:
        """
        Generate a summary report of a sweep

        Args:
            table: Results table from run_sweep
            output_path: Optional path to save report

        Returns:
            Report content as string
        """
        runs = table[table['seed'].astype(str) != MEAN_SEED]
        means = table[table['seed'].astype(str) == MEAN_SEED]
        failed = runs[runs['status'] != 'completed']
        stats = self.last_stats or {}

        report = f"""
D2D Interference Sweep Report
=============================
Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}
Ledger: {self.db_path}

Summary
-------
Total runs: {len(runs)}
Completed: {len(runs) - len(failed)}
Failed: {len(failed)}
Cached: {stats.get('cached', 0)}
Grid points: {len(means)}

Performance
-----------
Average run time: {stats.get('avg_run_time', 0.0):.2f}s (excluding cached)
Workers: {stats.get('workers', 1)}

Mean Results (metric: proxy)
----------------------------
"""
        ok = means[means['status'] != 'failed']
        if not ok.empty:
            grouped = ok.groupby(['strategy', 'fading_label'])[['p_det', 'd2d_throughput']].mean()
            for (strategy, label), row in grouped.iterrows():
                report += f"- {strategy} / {label}: p_det {row['p_det']:.4f}, D2D throughput {row['d2d_throughput']:.4f}\n"

        report += "\nFailed Runs\n-----------\n"
        for r in failed.itertuples(index=False):
            report += f"- {str(r.config_hash)[:12]} seed {r.seed}: {r.error}\n"

        if output_path:
            with open(output_path, 'w') as f:
                f.write(report)
            self.console.print(f"\n📄 Report saved to: {output_path}")

        return report


def _failed_row(job: SweepJob, seed: int, error: Exception) -> Dict[str, Any]:
    s = job.config.strategy
    return {
        'strategy': s.kind.value, 'rho': s.rho, 'rho_i': s.rho_i, 'rho_d': s.rho_d,
        'power_dbm': s.power_dbm, 'fading_label': job.config.fading.trace_label,
        'seed': seed, 'config_hash': job.config_hash,
        'status': 'failed', 'error': f"{type(error).__name__}: {error}",
    }


def _parse_overrides(pairs: Sequence[str]) -> List[tuple]:
    overrides = []
    for pair in pairs or []:
        if '=' not in pair:
            raise SimulationError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split('=', 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        overrides.append((key.strip(), value))
    return overrides


def _load_run_config(args) -> SimConfig:
    path = args.config or (DEFAULT_CONFIG if os.path.exists(DEFAULT_CONFIG) else None)
    config = load_config(path) if path else SimConfig()
    for key, value in _parse_overrides(args.set):
        config = with_override(config, key, value)
    if args.fading:
        config = with_override(config, 'fading.label', args.fading)
    return config


def cmd_run(args, console: Console) -> int:
    config = _load_run_config(args)
    seed = args.seed if args.seed is not None else config.seed
    seeds = list(range(seed, seed + args.n_seeds))

    runner = ExperimentRunner(args.db, console)
    console.print(f"🚀 Simulating {config.strategy.kind.value} at {config.strategy.power_dbm} dBm, "
                  f"{config.fading.trace_label} fading, seeds {seeds[0]}..{seeds[-1]}")
    results = runner.run_single(config, seeds)
    report = aggregate_reports([r.quality for r in results]) if len(results) > 1 else results[0].quality

    table = Table(title="Run Results")
    table.add_column("Seed", justify="right")
    table.add_column("p_det (proxy)", justify="right")
    table.add_column("D2D throughput", justify="right")
    table.add_column("Efficiency", justify="right")
    table.add_column("Lost packets", justify="right")
    table.add_column("Result hash")
    for r in results:
        q = r.quality
        table.add_row(str(r.seed), f"{q.p_det:.4f}", f"{q.d2d_rel_throughput:.4f}",
                      f"{q.efficiency:.4f}" if q.efficiency is not None else "-",
                      f"{r.lost:,}", r.result_hash[:16])
    console.print(table)

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        first = results[0]
        packet_map = build_packet_map(config.stream)
        save_loss_trace(first.loss_trace, packet_map, os.path.join(args.out, 'loss_trace.csv'))
        save_d2d_trace(first.loss_trace, os.path.join(args.out, 'd2d_trace.csv'))
        save_report_json(report, os.path.join(args.out, 'quality.json'))
        with open(os.path.join(args.out, 'timeline.json'), 'w') as f:
            json.dump({'seed': first.seed, 'config_hash': config_hash(config),
                       'timeline': first.timeline_summary}, f, indent=2)
        console.print(f"✅ Traces and report written to {args.out}")
    return 0


def cmd_sweep(args, console: Console) -> int:
    spec = load_sweep_spec(args.spec)
    if args.seed is not None:
        spec.seeds = list(range(args.seed, args.seed + len(spec.seeds)))
    if args.fading:
        spec.base = with_override(spec.base, 'fading.label', args.fading)
    workers = args.workers or int(os.environ.get('D2DSIM_WORKERS', 4))

    runner = ExperimentRunner(args.db, console)
    table = runner.run_sweep(spec, workers=workers, use_cache=not args.no_cache)
    for path in write_outputs(table, spec, csv_path=args.out):
        console.print(f"💾 Wrote {path}")

    console.print("\n" + "=" * 60)
    console.print(runner.generate_report(table, args.report))

    runs = table[table['seed'].astype(str) != MEAN_SEED]
    return 1 if (runs['status'] != 'completed').any() else 0


def cmd_compare(args, console: Console) -> int:
    delta = compare_strategies(load_results(args.fp_results), load_results(args.fdtp_results))
    if args.out:
        delta.to_csv(args.out, index=False)
        console.print(f"💾 Wrote {args.out}")

    table = Table(title="FDTP vs FP at equal D2D throughput")
    for column in ('fading_label', 'power_dbm', 'd2d_throughput', 'p_det_fp', 'p_det_fdtp', 'delta_p_det', 'delta_ci95', 'status'):
        table.add_column(column, justify="right")
    for r in delta.itertuples(index=False):
        table.add_row(str(r.fading_label), f"{r.power_dbm:g}", f"{r.d2d_throughput:.4f}", f"{r.p_det_fp:.4f}",
                      f"{r.p_det_fdtp:.4f}", f"{r.delta_p_det:+.4f}", f"{r.delta_ci95:.4f}", r.status)
    console.print(table)
    return 0


def cmd_analyze(args, console: Console) -> int:
    config = _load_run_config(args)
    packet_map = build_packet_map(config.stream)
    trace = load_loss_trace(args.loss_trace, args.d2d_trace)
    report = evaluate(trace, packet_map, config.quality.chain_propagation, include_d2d=bool(args.d2d_trace))

    console.print(f"📊 p_det (proxy): {report.p_det:.4f}")
    if report.d2d_rel_throughput is not None:
        console.print(f"📡 D2D throughput: {report.d2d_rel_throughput:.4f}")
        console.print(f"⚖️  Efficiency: {report.efficiency if report.efficiency is not None else 'undefined'}")
    damaged = sum(1 for g in report.per_gop if g.damaged_frames)
    console.print(f"🎞  GoPs with damage: {damaged}/{len(report.per_gop)}")

    if args.out:
        save_report_json(report, args.out)
        console.print(f"💾 Wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Slot-level simulator of a video uplink sharing resources with a D2D pair",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # One run with the default configuration
  %(prog)s run --seed 7 --out results/

  # Twenty seeds of one FP point under high-speed fading
  %(prog)s run --set strategy.kind=FP --set strategy.rho=0.3 --fading high --n-seeds 20

  # A throughput/detection sweep on 8 processes
  %(prog)s sweep sweeps/fdtp_low_speed.json --workers 8

  # Detection gain of FDTP over FP at equal D2D throughput
  %(prog)s compare results/fp_low_speed.csv results/fdtp_low_speed.csv --out results/delta_low.csv

  # Score an exported loss trace
  %(prog)s analyze results/loss_trace.csv --d2d-trace results/d2d_trace.csv
        """
    )
    parser.add_argument('--log-level', default=os.environ.get('D2DSIM_LOG_LEVEL', 'WARNING'),
                        help='Log level (default: D2DSIM_LOG_LEVEL or WARNING)')
    parser.add_argument('--db', help='Run ledger path (overrides D2DSIM_DB_PATH)')
    commands = parser.add_subparsers(dest='command', required=True)

    def add_config_args(p):
        p.add_argument('--config', help='Simulation config JSON (default: configs/default.json)')
        p.add_argument('--set', action='append', metavar='KEY=VALUE',
                       help='Override one dotted config key, e.g. strategy.rho_d=0.4 (repeatable)')
        p.add_argument('--fading', choices=['low', 'high', 'flat'], help='Fading trace to use')

    run_p = commands.add_parser('run', help='Simulate one configuration')
    add_config_args(run_p)
    run_p.add_argument('--seed', type=int, help='First seed (default: the config seed)')
    run_p.add_argument('--n-seeds', type=int, default=1, help='Number of consecutive seeds (default: 1)')
    run_p.add_argument('--out', help='Directory for loss/D2D traces and the quality report')

    sweep_p = commands.add_parser('sweep', help='Run a parameter sweep')
    sweep_p.add_argument('spec', help='Sweep specification JSON')
    sweep_p.add_argument('--workers', type=int, help='Worker processes (default: D2DSIM_WORKERS or 4)')
    sweep_p.add_argument('--fading', choices=['low', 'high', 'flat'], help='Fading trace for every grid point')
    sweep_p.add_argument('--seed', type=int, help='First seed; keeps the number of seeds in the sweep file')
    sweep_p.add_argument('--out', help='Results CSV (overrides the sweep file)')
    sweep_p.add_argument('--no-cache', action='store_true', help='Re-simulate runs already in the ledger')
    sweep_p.add_argument('--report', help='Save sweep report to file')

    compare_p = commands.add_parser('compare', help='Compare FP and FDTP sweep results')
    compare_p.add_argument('fp_results', help='FP results CSV')
    compare_p.add_argument('fdtp_results', help='FDTP results CSV')
    compare_p.add_argument('--out', help='Delta CSV')

    analyze_p = commands.add_parser('analyze', help='Score an exported loss trace')
    analyze_p.add_argument('loss_trace', help='Loss trace CSV')
    add_config_args(analyze_p)
    analyze_p.add_argument('--d2d-trace', help='D2D decision CSV, enables throughput and efficiency')
    analyze_p.add_argument('--out', help='Quality report JSON')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Command-line interface for the D2D interference simulator.

    Exit codes:
        0 - Everything ran
        1 - A run aborted or the inputs were invalid

    Environment variables used:
        D2DSIM_DB_PATH - Run ledger (default d2d_sweeps.db)
        D2DSIM_WORKERS - Default sweep worker count (default 4)
        D2DSIM_LOG_LEVEL - Log level (default WARNING)
        D2DSIM_DATA_DIR - Fixture directory (default data/)
    """
    args = build_parser().parse_args(argv)
    console = Console()
    logging.basicConfig(
        level=str(args.log_level).upper(),
        format="%(message)s",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
    )

    commands = {'run': cmd_run, 'sweep': cmd_sweep, 'compare': cmd_compare, 'analyze': cmd_analyze}
    try:
        return commands[args.command](args, console)
    except SimulationError as e:
        console.print(f"\n❌ {type(e).__name__}: {e}")
        return 1
    except Exception as e:
        logger.exception("Fatal error")
        console.print(f"\n❌ Fatal error: {e}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
