"""Campaign-scale runs at desk size. Minutes to hours; run with pytest -m slow."""

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from choiforge.campaigns.export import load_campaign_records
from choiforge.campaigns.presets import SWEEP_EPSILONS, SWEEP_GAMMAS, preset
from choiforge.campaigns.runner import CampaignSummary, real_map_campaign, run_campaign
from choiforge.campaigns.spec import CampaignSpec
from choiforge.generators.decomposable import kraus_from_dilation, train_non_cp_decomposable
from choiforge.optimizer.train import TrainConfig
from choiforge.sdp.certificates import CertificateEngine

pytestmark = pytest.mark.slow


def _only_row(summary: CampaignSummary) -> pd.Series:
    assert len(summary.frame) == 1
    return summary.frame.iloc[0]


def test_square_cell_converges(tmp_path):
    row = _only_row(run_campaign(preset("table-3x3", 20), tmp_path, jobs=4))
    assert row["success_rate"] >= 90.0
    assert 100 <= row["ase_mean"] <= 500
    assert row["validated"] == row["successes"]


def test_asymmetric_cell_finds_a_map(tmp_path):
    row = _only_row(run_campaign(preset("table-2x4", 20), tmp_path, jobs=4))
    assert row["successes"] >= 1
    assert row["validated"] == row["successes"]


def test_decomposable_generator_breaks_complete_positivity(tmp_path):
    row = _only_row(run_campaign(preset("decomposable", 20), tmp_path, jobs=4))
    assert row["successes"] == 20

    engine = CertificateEngine()
    records = load_campaign_records(tmp_path / "decomposable")
    assert len(records) == 20
    for record in records:
        assert record.final_choi.min_eigenvalue() < 0
        assert engine.zeta(record.final_choi, 1).value >= -1e-7


def test_decomposable_outputs_are_channel_mixtures():
    engine = CertificateEngine()
    for seed in range(3):
        spec, record = train_non_cp_decomposable(3, TrainConfig(seed=seed, max_epochs=500))
        assert record.succeeded
        for dilation in (spec.dilation1, spec.dilation2):
            kraus = kraus_from_dilation(dilation, 3)
            assert_allclose(sum(k.conj().T @ k for k in kraus), np.eye(3), atol=1e-10)
        assert engine.zeta(record.final_choi, 1).value >= -1e-7


def test_real_maps_into_four_levels(tmp_path):
    summary = real_map_campaign(4, 20, output_dir=tmp_path, jobs=4)
    assert summary.frame["successes"].sum() >= 1
    assert (summary.frame["validated"] == summary.frame["successes"]).all()


def test_ppt_square_batch_completes(tmp_path):
    row = _only_row(run_campaign(preset("pptsq", 10), tmp_path, jobs=4))
    assert row["runs"] == 10
    assert row["solver_failures"] == 0

    records = load_campaign_records(tmp_path / "pptsq")
    assert len(records) == 10
    for record in records:
        assert record.metadata["final_zeta1"] >= -1e-6 or record.metadata["violation"]


def test_hyperparameter_sweep_corner(tmp_path):
    summary = run_campaign(preset("sweep", 10), tmp_path, jobs=4)
    frame = summary.frame
    assert len(frame) == len(SWEEP_EPSILONS) * len(SWEEP_GAMMAS)
    corner = frame[(frame["epsilon"] == max(SWEEP_EPSILONS)) & (frame["gamma"] == min(SWEEP_GAMMAS))]
    assert corner["success_rate"].iloc[0] == frame["success_rate"].min()

    default_epochs = [
        r.success_epoch
        for r in summary.results
        if r.epsilon == 0.05 and r.gamma == 2.0 and r.success_epoch is not None
    ]
    assert default_epochs
    assert np.median(default_epochs) < 400


def test_campaigns_are_deterministic(tmp_path):
    spec = CampaignSpec(experiment="repeat", d_in=2, d_out=4, runs=3, train=TrainConfig(max_epochs=50))
    first = run_campaign(spec, tmp_path / "a").frame.drop(columns=["mean_wall_s"])
    second = run_campaign(spec, tmp_path / "b").frame.drop(columns=["mean_wall_s"])
    pd.testing.assert_frame_equal(first, second)

    runs_a = load_campaign_records(tmp_path / "a" / "repeat")
    runs_b = load_campaign_records(tmp_path / "b" / "repeat")
    assert len(runs_a) == 3
    assert all(a.same_trajectory(b) for a, b in zip(runs_a, runs_b))
