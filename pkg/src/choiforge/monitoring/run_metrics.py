"""
Run metrics for choiforge.
Counts certificate solves, training epochs and run outcomes on a private
Prometheus registry, with optional HTTP exposition for long campaigns.
"""

import logging
import platform
from typing import Any, Dict, Optional

import psutil
from prometheus_client import CollectorRegistry, Counter, Histogram, start_http_server

logger = logging.getLogger(__name__)

SOLVE_BUCKETS = (0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0, 30.0)


class RunMetrics:
    """Prometheus collectors for one process"""

    def __init__(self, registry: Optional[CollectorRegistry] = None):
        self.registry = registry or CollectorRegistry()
        self._metrics = {
            "sdp_solves": Counter(
                "choiforge_sdp_solves_total",
                "Certificate programs solved",
                ["kind", "status"],
                registry=self.registry,
            ),
            "sdp_solve_duration": Histogram(
                "choiforge_sdp_solve_duration_seconds",
                "Certificate solve duration",
                ["kind"],
                buckets=SOLVE_BUCKETS,
                registry=self.registry,
            ),
            "epochs": Counter(
                "choiforge_epochs_total", "Training epochs evaluated", registry=self.registry
            ),
            "run_outcomes": Counter(
                "choiforge_run_outcomes_total",
                "Finished runs by outcome",
                ["outcome"],
                registry=self.registry,
            ),
        }
        self._server_port: Optional[int] = None

    def record_solve(self, kind: str, status: str, seconds: float) -> None:
        self._metrics["sdp_solves"].labels(kind=kind, status=status).inc()
        self._metrics["sdp_solve_duration"].labels(kind=kind).observe(seconds)

    def record_epoch(self) -> None:
        self._metrics["epochs"].inc()

    def record_outcome(self, outcome: str) -> None:
        self._metrics["run_outcomes"].labels(outcome=outcome).inc()

    def sample(self, name: str, labels: Optional[Dict[str, str]] = None) -> float:
        """Current value of one sample, 0.0 when it has not been recorded"""
        value = self.registry.get_sample_value(name, labels or {})
        return float(value) if value is not None else 0.0

    def start_http(self, port: int) -> None:
        """Expose the registry on http://0.0.0.0:<port>/metrics"""
        if self._server_port is not None:
            logger.warning(f"Metrics server already running on port {self._server_port}")
            return
        start_http_server(port, registry=self.registry)
        self._server_port = port
        logger.info(f"Metrics exposed on port {port}")


def host_snapshot() -> Dict[str, Any]:
    """Host facts for the reproducibility header"""
    memory = psutil.virtual_memory()
    return {
        "python": platform.python_version(),
        "platform": platform.platform(),
        "cpu_count": psutil.cpu_count(),
        "memory_total_bytes": memory.total,
    }
