#!/usr/bin/env python3
"""
Run Ledger for D2D Interference Sweeps

A small SQLite table that tracks every (config, seed) run of a sweep and
what happened to it. Completed runs are reused on the next invocation, so an
interrupted sweep resumes where it stopped.

Usage:
    ledger = RunQueue('d2d_sweeps.db')
    ledger.add_runs('fig4_fdtp_low', config, seeds=range(20))
    done = ledger.get_completed(config_hash(config))
    ledger.save_rows(rows)
"""

import json
import sqlite3
from typing import Any, Dict, Iterable, List, Optional

import aiosqlite

from core.config import SimConfig, config_hash, config_to_dict


class RunQueue:
    """
    Ledger of sweep runs keyed by (config_hash, seed).

    Status progression:
        pending → processing → completed/failed

    Failed runs are retried by the next sweep; completed runs are not.

    Table schema (created automatically):
        sweep_runs:
            config_hash   - SHA-256 of the config without its seed
            seed          - Seed of the run
            sweep_name    - Sweep that first asked for the run
            status        - pending|processing|completed|failed
            config_json   - Full config, for inspection
            result_json   - Result row once completed
            error_type    - Exception class of a failed run
            error_message - Exception message of a failed run
    """

    def __init__(self, db_path: str):
        self.db_path = db_path
        self._init_table()

    def _init_table(self):
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                CREATE TABLE IF NOT EXISTS sweep_runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    config_hash TEXT NOT NULL,
                    seed INTEGER NOT NULL,
                    sweep_name TEXT,
                    status TEXT DEFAULT 'pending',
                    config_json TEXT,
                    result_json TEXT,
                    error_type TEXT,
                    error_message TEXT,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
                    started_at TIMESTAMP,
                    completed_at TIMESTAMP,
                    UNIQUE(config_hash, seed)
                )
            """)
            conn.execute("""
                CREATE INDEX IF NOT EXISTS idx_runs_status
                ON sweep_runs(status)
            """)

    def add_runs(self, sweep_name: str, config: SimConfig, seeds: Iterable[int]) -> str:
        """Register runs for one grid point (existing rows are left alone)"""
        chash = config_hash(config)
        config_json = json.dumps(config_to_dict(config), sort_keys=True)
        with sqlite3.connect(self.db_path) as conn:
            conn.executemany("""
                INSERT OR IGNORE INTO sweep_runs (config_hash, seed, sweep_name, config_json)
                VALUES (?, ?, ?, ?)
            """, [(chash, int(seed), sweep_name, config_json) for seed in seeds])
        return chash

    def mark_processing(self, chash: str, seeds: Iterable[int]):
        with sqlite3.connect(self.db_path) as conn:
            conn.executemany("""
                UPDATE sweep_runs
                SET status = 'processing', started_at = CURRENT_TIMESTAMP
                WHERE config_hash = ? AND seed = ?
            """, [(chash, int(seed)) for seed in seeds])

    @staticmethod
    def _update_args(row: Dict[str, Any]):
        if row.get('status') == 'completed':
            return ("""
                UPDATE sweep_runs
                SET status = 'completed', completed_at = CURRENT_TIMESTAMP,
                    result_json = ?, error_type = NULL, error_message = NULL
                WHERE config_hash = ? AND seed = ?
            """, (json.dumps(row), row['config_hash'], int(row['seed'])))

        error = row.get('error') or 'UnknownError: '
        error_type, _, message = error.partition(': ')
        return ("""
            UPDATE sweep_runs
            SET status = 'failed', completed_at = CURRENT_TIMESTAMP,
                error_type = ?, error_message = ?
            WHERE config_hash = ? AND seed = ?
        """, (error_type, message, row['config_hash'], int(row['seed'])))

    def save_rows(self, rows: Iterable[Dict[str, Any]]):
        """Record finished result rows (completed or failed)"""
        with sqlite3.connect(self.db_path) as conn:
            for row in rows:
                conn.execute(*self._update_args(row))

    async def save_rows_async(self, rows: Iterable[Dict[str, Any]]):
        """Same as save_rows, for the parallel sweep's event loop"""
        async with aiosqlite.connect(self.db_path) as db:
            for row in rows:
                await db.execute(*self._update_args(row))
            await db.commit()

    def get_completed(self, chash: str) -> Dict[int, Dict[str, Any]]:
        """Result rows of the completed runs of one grid point, by seed"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute("""
                SELECT seed, result_json FROM sweep_runs
                WHERE config_hash = ? AND status = 'completed'
            """, (chash,))
            return {seed: json.loads(result) for seed, result in cursor.fetchall()}

    def get_failed(self, limit: Optional[int] = None) -> List[Dict[str, Any]]:
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            cursor = conn.execute("""
                SELECT config_hash, seed, sweep_name, error_type, error_message
                FROM sweep_runs
                WHERE status = 'failed'
                ORDER BY completed_at DESC
                LIMIT ?
            """, (limit if limit is not None else -1,))
            return [dict(row) for row in cursor.fetchall()]

    def get_status(self) -> Dict[str, int]:
        """Run count per status"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute("""
                SELECT status, COUNT(*) as count
                FROM sweep_runs
                GROUP BY status
            """)
            return {row[0]: row[1] for row in cursor.fetchall()}


if __name__ == '__main__':
    import sys

    ledger = RunQueue(sys.argv[1] if len(sys.argv) > 1 else 'd2d_sweeps.db')
    print("\nRun ledger status:")
    for state, count in sorted(ledger.get_status().items()):
        print(f"  {state}: {count}")
    failed = ledger.get_failed(5)
    if failed:
        print("\nRecent failures:")
        for run in failed:
            print(f"  [{run['config_hash'][:12]}/{run['seed']}] {run['error_type']}: {run['error_message']}")
