"""Service for process and host resource metrics used in training diagnostics."""
from typing import Dict

import psutil


class RuntimeMetricsService:
    """Reads process/host metrics through psutil."""

    def __init__(self):
        self._process = psutil.Process()
        # Prime cpu_percent so the next call returns a real interval value
        self._process.cpu_percent(interval=None)

    def snapshot(self) -> Dict:
        """Get current process RSS, CPU and host memory availability."""
        try:
            memory = psutil.virtual_memory()
            return {
                'rss_mb': self._process.memory_info().rss / (1024 * 1024),
                'cpu_percent': self._process.cpu_percent(interval=None),
                'system_available_gb': memory.available / (1024 ** 3),
                'system_percent': memory.percent,
            }
        except (psutil.NoSuchProcess, psutil.AccessDenied) as e:
            return {'error': str(e)}

    def describe(self) -> str:
        """One-line summary for progress logs."""
        snap = self.snapshot()
        if 'error' in snap:
            return f"metrics unavailable ({snap['error']})"
        return (f"rss={snap['rss_mb']:.0f}MB cpu={snap['cpu_percent']:.0f}% "
                f"host_free={snap['system_available_gb']:.1f}GB")


def default_workers() -> int:
    """Physical core count, falling back to logical count, then 1."""
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


# Global metrics service instance
_metrics_service = None


def get_metrics_service() -> RuntimeMetricsService:
    """Get global runtime metrics service instance."""
    global _metrics_service
    if _metrics_service is None:
        _metrics_service = RuntimeMetricsService()
    return _metrics_service
