import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from choiforge.campaigns import runner
from choiforge.campaigns.export import (
    DIAGNOSTIC_COLUMNS,
    LOSS_COLUMNS,
    ZETA_COLUMNS,
    export_plot_data,
    load_campaign_records,
)
from choiforge.campaigns.presets import preset, preset_names
from choiforge.campaigns.runner import (
    SUMMARY_COLUMNS,
    CampaignSummary,
    RunResult,
    plan_jobs,
    real_map_campaign,
    run_campaign,
    wilson_interval,
)
from choiforge.campaigns.spec import (
    CampaignCell,
    CampaignKind,
    CampaignSpec,
    load_campaign_spec,
    save_campaign_spec,
)
from choiforge.campaigns.validation import (
    ValidationSettings,
    ValidationSeverity,
    mask_residual,
    validate_found_map,
)
from choiforge.choi.masks import family9_mask
from choiforge.choi.params import build_choi
from choiforge.exceptions import InputError
from choiforge.optimizer.records import EpochRow, RunOutcome, RunRecord
from choiforge.sdp.conic import ExtendSide, SolverOptions

FAST_VALIDATION = ValidationSettings(probe_samples=200, seesaw_iters=10)


def _result(seed, outcome="success", success_epoch=None, epsilon=0.05, gamma=2.0, **kwargs):
    fields = dict(
        experiment="exp",
        d_in=3,
        d_out=3,
        k=2,
        epsilon=epsilon,
        gamma=gamma,
        mask="none",
        seed=seed,
        outcome=outcome,
        success_epoch=success_epoch,
        epochs=success_epoch or 100,
        wall_s=1.0,
        extend_side="second",
        directory=f"runs/exp/{seed}",
    )
    fields.update(kwargs)
    return RunResult(**fields)


class TestSpec:
    def test_cells_cross_the_grid(self):
        spec = CampaignSpec(experiment="s", epsilons=[0.01, 0.1], gammas=[1.0, 2.0, 4.0], runs=3)
        assert len(spec.cells()) == 6
        assert spec.seeds() == [0, 1, 2]
        assert spec.cells()[0].tag == "eps0.01_gamma1"

    def test_mask_tag(self):
        assert CampaignCell(0.05, 2.0, "random:0.5", 1).tag == "eps0.05_gamma2_mask1"

    def test_loss_and_train_per_cell(self):
        spec = CampaignSpec(experiment="s", kind=CampaignKind.BOUND, k=3, base_seed=10)
        cell = spec.cells()[0]
        loss = spec.loss_for(cell)
        assert loss.k == 3 and loss.mode.value == "bound"
        assert spec.train_for(spec.seeds()[1]).seed == 11

    def test_shape_rules(self):
        with pytest.raises(ValidationError):
            CampaignSpec(experiment="s", kind=CampaignKind.BOUND, d_in=2, d_out=3)
        with pytest.raises(ValidationError):
            CampaignSpec(experiment="s", kind=CampaignKind.PPT_SQUARE, real=True)

    def test_yaml_and_json_roundtrip(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("experiment: y\nd_in: 2\nd_out: 4\nepsilons: [0.1]\nextend_side: first\n")
        spec = load_campaign_spec(path)
        assert (spec.d_in, spec.d_out, spec.extend_side) == (2, 4, ExtendSide.FIRST)
        saved = save_campaign_spec(spec, tmp_path / "c.json")
        assert load_campaign_spec(saved) == spec

    def test_invalid_spec_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"experiment": "x", "runs": 0}))
        with pytest.raises(InputError):
            load_campaign_spec(path)
        with pytest.raises(InputError):
            load_campaign_spec(tmp_path / "missing.json")

    def test_presets(self):
        for name in preset_names():
            assert preset(name, runs=2).runs == 2
        sweep = preset("sweep")
        assert len(sweep.cells()) == 16
        assert preset("real-m4").real
        with pytest.raises(InputError):
            preset("table-9x9")

    def test_only_the_bound_preset_is_trace_preserving(self):
        assert CampaignSpec(experiment="x").tp is False
        assert preset("table-3x3").tp is False
        assert preset("table-2x4").tp is False
        assert preset("sweep").tp is False
        assert preset("bound").tp is True


class TestStatistics:
    def test_wilson_interval_zero_successes(self):
        low, high = wilson_interval(0, 20)
        assert low == pytest.approx(0.0, abs=1e-9)
        assert high == pytest.approx(16.11, abs=0.01)

    def test_wilson_interval_is_symmetric_at_half(self):
        low, high = wilson_interval(10, 20)
        assert low + high == pytest.approx(100.0)
        assert low < 50.0 < high

    def test_wilson_interval_without_runs(self):
        assert all(np.isnan(v) for v in wilson_interval(0, 0))

    def test_summary_arithmetic(self):
        results = [
            _result(0, success_epoch=10),
            _result(1, success_epoch=20),
            _result(2, outcome="exhausted"),
            _result(3, outcome="solver_failed"),
            _result(0, success_epoch=5, gamma=4.0),
        ]
        summary = CampaignSummary.from_results(results)
        assert list(summary.frame.columns) == SUMMARY_COLUMNS
        cell = summary.cell(0.05, 2.0)
        assert cell["runs"] == 4
        assert cell["successes"] == 2
        assert cell["success_rate"] == pytest.approx(50.0)
        assert cell["ase_mean"] == pytest.approx(15.0)
        assert cell["ase_std"] == pytest.approx(np.sqrt(50.0))
        assert cell["solver_failures"] == 1
        single = summary.cell(0.05, 4.0)
        assert single["ase_mean"] == 5.0
        assert np.isnan(single["ase_std"])
        assert summary.total_successes == 3

    def test_summary_without_successes(self):
        cell = CampaignSummary.from_results([_result(0, outcome="exhausted")]).cell(0.05, 2.0)
        assert cell["successes"] == 0
        assert np.isnan(cell["ase_mean"])

    def test_empty_summary(self):
        summary = CampaignSummary.from_results([])
        assert summary.frame.empty
        assert summary.total_successes == 0
        with pytest.raises(InputError):
            summary.cell(0.05, 2.0)


def _fake_train_loop(init, loss_cfg, train_cfg, solver_options=None, **kwargs):
    success = train_cfg.seed % 2 == 0
    rows = [EpochRow(e, 0.1 / e, -0.01 * e, 0.0, wall_s=0.01 * e) for e in range(1, 4)]
    return RunRecord(
        rows=rows,
        outcome=RunOutcome.SUCCESS if success else RunOutcome.EXHAUSTED,
        success_epoch=3 if success else None,
        final_choi=build_choi(init),
        seed=train_cfg.seed,
        metadata={
            "loss": loss_cfg.model_dump(mode="json"),
            "extend_side": solver_options.extend_side.value,
        },
    )


class TestRunner:
    def test_plan_applies_extend_side_override(self, tmp_path):
        spec = CampaignSpec(experiment="p", runs=2, epsilons=[0.01, 0.1], extend_side=ExtendSide.FIRST)
        jobs = plan_jobs(spec, tmp_path)
        assert len(jobs) == 4
        assert all(job.solver_options.extend_side is ExtendSide.FIRST for job in jobs)
        assert jobs[0].directory == str(tmp_path / "p" / "eps0.01_gamma2" / "0")

    def test_single_cell_layout_has_no_cell_level(self, tmp_path):
        jobs = plan_jobs(CampaignSpec(experiment="p", runs=1), tmp_path)
        assert jobs[0].directory == str(tmp_path / "p" / "0")

    def test_inline_campaign_writes_artifacts(self, tmp_path, monkeypatch):
        monkeypatch.setattr(runner, "train_loop", _fake_train_loop)
        spec = CampaignSpec(
            experiment="toy", d_in=2, d_out=2, runs=3, epsilons=[0.05, 0.1], validate_finds=False
        )
        summary = run_campaign(spec, tmp_path, jobs=1)
        root = tmp_path / "toy"
        assert (root / "campaign.json").is_file()
        assert (root / "summary.csv").is_file()
        assert (root / "eps0.05_gamma2" / "1" / "record.csv").is_file()
        assert len(summary.frame) == 2
        cell = summary.cell(0.05, 2.0)
        assert cell["successes"] == 2
        assert cell["ase_mean"] == 3.0

        recomputed = CampaignSummary.from_directory(root)
        pd.testing.assert_frame_equal(
            recomputed.frame.drop(columns=["mean_wall_s"]),
            summary.frame.drop(columns=["mean_wall_s"]),
            check_dtype=False,
        )

    def test_masked_runs_persist_their_mask(self, tmp_path, monkeypatch):
        monkeypatch.setattr(runner, "train_loop", _fake_train_loop)
        spec = CampaignSpec(experiment="m", runs=1, masks=["family9"], validate_finds=False)
        run_campaign(spec, tmp_path)
        assert (tmp_path / "m" / "0" / "mask.json").is_file()

    def test_failing_run_is_counted_not_fatal(self, tmp_path):
        spec = CampaignSpec(experiment="bad", runs=2, masks=["no-such-mask.json"])
        summary = run_campaign(spec, tmp_path)
        cell = summary.cell(0.05, 2.0)
        assert cell["runs"] == 2
        assert cell["solver_failures"] == 2
        assert all(r.error for r in summary.results)

    def test_real_maps_need_four_output_levels(self, tmp_path):
        with pytest.raises(InputError):
            real_map_campaign(3, runs=1, output_dir=tmp_path)


class TestExport:
    def test_empty_input_writes_headers(self, tmp_path):
        paths = export_plot_data([], tmp_path)
        assert list(pd.read_csv(paths["loss_traces"]).columns) == LOSS_COLUMNS
        assert list(pd.read_csv(paths["zeta_traces"]).columns) == ZETA_COLUMNS
        assert list(pd.read_csv(paths["diagnostics"]).columns) == DIAGNOSTIC_COLUMNS

    def test_diagnostic_epochs(self, tmp_path):
        record = RunRecord(
            rows=[
                EpochRow(1, 0.5, -0.01, -0.2),
                EpochRow(2, 0.1, -0.06, 0.01),
                EpochRow(3, 0.0, -0.07, 0.02),
            ],
            outcome=RunOutcome.SUCCESS,
            success_epoch=3,
            final_choi=None,
            seed=7,
            metadata={"experiment": "x", "loss": {"epsilon": 0.05, "gamma": 2.0}},
        )
        paths = export_plot_data([record], tmp_path)
        diag = pd.read_csv(paths["diagnostics"]).iloc[0]
        assert diag["first_zetak_nonneg_epoch"] == 2
        assert diag["last_zeta1_below_margin_epoch"] == 3
        assert diag["seed"] == 7
        assert len(pd.read_csv(paths["loss_traces"])) == 3

    def test_campaign_records_export(self, tmp_path, monkeypatch):
        monkeypatch.setattr(runner, "train_loop", _fake_train_loop)
        run_campaign(CampaignSpec(experiment="e", d_in=2, d_out=2, runs=2, validate_finds=False), tmp_path)
        records = load_campaign_records(tmp_path / "e")
        assert len(records) == 2
        paths = export_plot_data(records, tmp_path / "plots")
        traces = pd.read_csv(paths["zeta_traces"])
        assert set(traces["experiment"]) == {"e"}
        assert len(traces) == 6


class TestValidation:
    def test_choi_map_is_non_decomposable_and_block_positive(self, choi_map, engine):
        settings = FAST_VALIDATION.model_copy(update={"epsilon": 1e-4})
        report = validate_found_map(choi_map, settings, engine=engine, require_non_decomposable=False)
        assert report.non_decomposable
        assert report.solved
        checks = {f.check for f in report.findings}
        assert "spectrum" not in checks
        assert "block_positivity" not in checks
        assert report.values["lambda_min"] < 0
        assert report.values["lambda_min_pt"] < 0
        assert "xi" in report.values

    def test_decomposable_map_fails_the_claim(self, swap_d3, engine):
        report = validate_found_map(swap_d3, FAST_VALIDATION, engine=engine)
        assert not report.non_decomposable
        assert not report.passed
        finding = next(f for f in report.findings if f.check == "zeta1")
        assert finding.severity is ValidationSeverity.HIGH
        assert report.to_dict()["passed"] is False

    def test_mask_residual(self, identity_d3):
        assert mask_residual(identity_d3, None) == 0.0
        assert mask_residual(identity_d3, family9_mask()) == pytest.approx(1.0)

    def test_mask_violation_is_reported(self, identity_d3, engine):
        report = validate_found_map(
            identity_d3, FAST_VALIDATION, mask=family9_mask(), engine=engine, require_non_decomposable=False
        )
        assert any(f.check == "mask" and f.severity is ValidationSeverity.HIGH for f in report.findings)
