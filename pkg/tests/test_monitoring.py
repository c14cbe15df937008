import pytest
from prometheus_client import CollectorRegistry, generate_latest

from choiforge.monitoring.run_metrics import RunMetrics, host_snapshot


def test_metrics_live_on_a_private_registry():
    first, second = RunMetrics(), RunMetrics()
    first.record_epoch()
    assert first.sample("choiforge_epochs_total") == 1.0
    assert second.sample("choiforge_epochs_total") == 0.0


def test_solve_and_outcome_counters():
    metrics = RunMetrics(CollectorRegistry())
    metrics.record_solve("zeta1", "optimal", 0.02)
    metrics.record_solve("zetak", "optimal", 0.3)
    metrics.record_solve("zetak", "failed", 1.5)
    metrics.record_outcome("success")
    metrics.record_outcome("success")
    assert metrics.sample("choiforge_sdp_solves_total", {"kind": "zetak", "status": "optimal"}) == 1.0
    assert metrics.sample("choiforge_sdp_solve_duration_seconds_count", {"kind": "zetak"}) == 2.0
    assert metrics.sample("choiforge_sdp_solve_duration_seconds_sum", {"kind": "zetak"}) == pytest.approx(1.8)
    assert metrics.sample("choiforge_run_outcomes_total", {"outcome": "success"}) == 2.0
    assert metrics.sample("choiforge_run_outcomes_total", {"outcome": "exhausted"}) == 0.0
    assert b"choiforge_sdp_solves_total" in generate_latest(metrics.registry)


def test_host_snapshot_fields():
    snapshot = host_snapshot()
    assert set(snapshot) == {"python", "platform", "cpu_count", "memory_total_bytes"}
    assert snapshot["memory_total_bytes"] > 0
