#!/usr/bin/env python3
"""
Test worker pool sizing and run statistics
"""

import os
import sys

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.core.concurrency import WorkerPoolManager


def test_pool_sizing():
    pool = WorkerPoolManager(requested_workers=8, cpu_count=4)
    assert pool.max_workers == 4
    assert pool.workers_for(100) == 4
    assert pool.workers_for(2) == 2
    assert pool.workers_for(0) == 1

    assert WorkerPoolManager(requested_workers=0, cpu_count=4).max_workers == 1
    assert WorkerPoolManager(requested_workers=3, cpu_count=16).workers_for(10) == 3
    print("✓ Pool never exceeds CPUs or jobs")


def test_statistics():
    pool = WorkerPoolManager(requested_workers=2, cpu_count=2)
    assert pool.get_avg_run_time() == 0.0

    pool.record_success(1.5, runs=3)
    pool.record_success(0.5)
    pool.record_error(2)
    pool.record_cached(5)

    stats = pool.get_stats()
    assert stats['completed'] == 4
    assert stats['failed'] == 2
    assert stats['cached'] == 5
    assert stats['avg_run_time'] == 0.5
    assert stats['workers'] == 2
    assert stats['runs_per_sec'] >= 0.0
    print("✓ Run statistics")


if __name__ == "__main__":
    test_pool_sizing()
    test_statistics()
    print("\n✅ All concurrency tests passed!")
