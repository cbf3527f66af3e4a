"""Core functionality for the D2D/LTE coexistence simulator."""

from .concurrency import WorkerPoolManager

__all__ = ['WorkerPoolManager']
