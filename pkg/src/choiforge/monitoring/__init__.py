from .run_metrics import RunMetrics, host_snapshot

__all__ = [
    'RunMetrics',
    'host_snapshot',
]
