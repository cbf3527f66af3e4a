"""Worker pool sizing and run statistics for parallel sweeps."""

import os
import time
from typing import Dict, Any, Optional


class WorkerPoolManager:
    """
    Sizes the sweep worker pool and keeps per-sweep run statistics.

    Simulations are CPU bound, so the pool never exceeds the CPU count or
    the number of jobs. Counters feed the statistics table shown while a
    sweep runs and the final report.
    """

    def __init__(self, requested_workers: int = 4, cpu_count: Optional[int] = None):
        self.requested_workers = max(1, requested_workers)
        self.cpu_count = cpu_count or os.cpu_count() or 1
        self.min_workers = 1
        self.max_workers = min(self.requested_workers, self.cpu_count)

        # Performance tracking
        self.success_count = 0
        self.error_count = 0
        self.cached_count = 0
        self.total_run_time = 0.0
        self.start_time = time.time()

    def workers_for(self, n_jobs: int) -> int:
        """Workers to start for n_jobs pending jobs."""
        return max(self.min_workers, min(self.max_workers, n_jobs))

    def record_success(self, run_time: float, runs: int = 1):
        """Record completed runs and the wall time they took"""
        self.success_count += runs
        self.total_run_time += run_time

    def record_error(self, runs: int = 1):
        self.error_count += runs

    def record_cached(self, runs: int = 1):
        """Record runs reused from the run ledger"""
        self.cached_count += runs

    def get_avg_run_time(self) -> float:
        """Average wall time per completed run"""
        if self.success_count == 0:
            return 0.0
        return self.total_run_time / self.success_count

    def get_stats(self) -> Dict[str, Any]:
        elapsed = time.time() - self.start_time
        return {
            'completed': self.success_count,
            'failed': self.error_count,
            'cached': self.cached_count,
            'avg_run_time': self.get_avg_run_time(),
            'runs_per_sec': self.success_count / elapsed if elapsed > 0 else 0.0,
            'workers': self.max_workers,
        }
