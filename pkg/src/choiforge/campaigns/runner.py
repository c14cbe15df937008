"""
Campaign runner.
Executes every (cell, seed) run of a campaign, in a process pool when more
than one job is allowed, persists each run under
<output>/<experiment>[/<cell>]/<seed>/ and reduces the results into a
per-cell summary. A failing run is counted, never fatal to the campaign.
"""

import concurrent.futures as fut
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from choiforge.campaigns.spec import CampaignCell, CampaignKind, CampaignSpec, save_campaign_spec
from choiforge.campaigns.validation import ValidationSettings, validate_found_map
from choiforge.choi.io import save_mask
from choiforge.choi.masks import resolve_mask
from choiforge.exceptions import ChoiForgeError, InputError
from choiforge.generators.decomposable import train_non_cp_decomposable
from choiforge.generators.ppt_square import ppt_square_run
from choiforge.optimizer.records import FLOAT_FORMAT, RunOutcome, RunRecord, load_run, save_run
from choiforge.optimizer.train import random_init, train_loop
from choiforge.sdp.conic import SolverOptions

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "experiment",
    "d_in",
    "d_out",
    "k",
    "epsilon",
    "gamma",
    "mask",
    "extend_side",
    "runs",
    "successes",
    "success_rate",
    "ci_low",
    "ci_high",
    "ase_mean",
    "ase_std",
    "mean_wall_s",
    "solver_failures",
    "validated",
    "flagged",
]
CELL_KEYS = ["experiment", "d_in", "d_out", "k", "epsilon", "gamma", "mask"]


@dataclass
class RunJob:
    """Everything a worker process needs for one run"""

    spec: CampaignSpec
    cell: CampaignCell
    seed: int
    directory: str
    solver_options: SolverOptions
    validation: ValidationSettings


@dataclass
class RunResult:
    """Outcome of one run as seen by the aggregation"""

    experiment: str
    d_in: int
    d_out: int
    k: int
    epsilon: float
    gamma: float
    mask: str
    seed: int
    outcome: str
    success_epoch: Optional[int]
    epochs: int
    wall_s: float
    extend_side: str
    directory: str
    validated: Optional[bool] = None
    flagged: bool = False
    error: Optional[str] = None


def _campaign_block(job: RunJob) -> Dict[str, Any]:
    return {
        "experiment": job.spec.experiment,
        "kind": job.spec.kind.value,
        "cell": job.cell.tag,
        "d_in": job.spec.d_in,
        "d_out": job.spec.d_out,
        "k": job.spec.k,
        "epsilon": job.cell.epsilon,
        "gamma": job.cell.gamma,
        "mask": job.cell.mask or "none",
    }


def _train(job: RunJob, mask: Optional[np.ndarray]) -> RunRecord:
    spec = job.spec
    loss_cfg = spec.loss_for(job.cell)
    train_cfg = spec.train_for(job.seed)
    if spec.kind is CampaignKind.DECOMPOSABLE:
        _, record = train_non_cp_decomposable(spec.d_in, train_cfg, spec.ancilla_dim)
        return record
    if spec.kind is CampaignKind.PPT_SQUARE:
        return ppt_square_run(
            train_cfg,
            loss_cfg,
            small_dim=spec.d_in,
            large_dim=spec.d_out,
            penalty_weight=spec.ppt_penalty_weight,
            solver_options=job.solver_options,
        )
    init = random_init(
        spec.d_in, spec.d_out, train_cfg, mask=mask, tp=spec.tp, real=spec.real, tp_mode=spec.tp_mode
    )
    return train_loop(init, loss_cfg, train_cfg, solver_options=job.solver_options)


def execute_run(job: RunJob) -> RunResult:
    """Train, persist and (on success) validate one run; top-level for pickling"""
    block = _campaign_block(job)
    result = RunResult(
        experiment=job.spec.experiment,
        d_in=job.spec.d_in,
        d_out=job.spec.d_out,
        k=job.spec.k,
        epsilon=job.cell.epsilon,
        gamma=job.cell.gamma,
        mask=block["mask"],
        seed=job.seed,
        outcome=RunOutcome.SOLVER_FAILED.value,
        success_epoch=None,
        epochs=0,
        wall_s=0.0,
        extend_side=job.solver_options.extend_side.value,
        directory=job.directory,
    )
    try:
        mask = resolve_mask(job.cell.mask, job.spec.d_in, job.spec.d_out, seed=job.seed)
        record = _train(job, mask)
        record.metadata["campaign"] = block
        out = save_run(record, job.directory)
        if mask is not None:
            save_mask(mask, job.spec.d_in, job.spec.d_out, out / "mask.json")

        result.outcome = record.outcome.value
        result.success_epoch = record.success_epoch
        result.epochs = record.epochs
        result.wall_s = record.wall_seconds
        result.extend_side = record.metadata.get("extend_side_used", result.extend_side)
        result.flagged = bool(record.metadata.get("violation", False))

        if record.succeeded and job.spec.validate_finds and job.spec.kind in (
            CampaignKind.MAIN,
            CampaignKind.BOUND,
        ):
            settings = job.validation.model_copy(
                update={"epsilon": job.cell.epsilon, "k": job.spec.k}
            )
            report = validate_found_map(
                record.final_choi,
                settings,
                mask=mask,
                solver_options=job.solver_options,
                require_non_decomposable=job.spec.kind is CampaignKind.MAIN,
            )
            with open(out / "validation.json", "w") as f:
                json.dump(report.to_dict(), f, indent=2, default=str)
            result.validated = report.passed
    except ChoiForgeError as e:
        logger.error(f"Run {job.spec.experiment} seed={job.seed} failed: {str(e)}")
        result.error = str(e)
    return result


def _run_directory(root: Path, spec: CampaignSpec, cell: CampaignCell, seed: int) -> Path:
    base = root / spec.experiment
    if len(spec.cells()) > 1:
        base = base / cell.tag
    return base / str(seed)


def plan_jobs(
    spec: CampaignSpec,
    output_dir: Union[str, Path],
    solver_options: Optional[SolverOptions] = None,
    validation: Optional[ValidationSettings] = None,
) -> List[RunJob]:
    options = solver_options or SolverOptions()
    if spec.extend_side is not None:
        options = options.with_extend_side(spec.extend_side)
    settings = validation or ValidationSettings()
    root = Path(output_dir)
    return [
        RunJob(spec, cell, seed, str(_run_directory(root, spec, cell, seed)), options, settings)
        for cell in spec.cells()
        for seed in spec.seeds()
    ]


def wilson_interval(successes: int, runs: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion, in percent"""
    if runs == 0:
        return float("nan"), float("nan")
    ci = stats.binomtest(successes, runs).proportion_ci(confidence_level=confidence, method="wilson")
    return 100.0 * ci.low, 100.0 * ci.high


class CampaignSummary:
    """Per-cell statistics over the runs of a campaign"""

    def __init__(self, frame: pd.DataFrame, results: Optional[List[RunResult]] = None):
        self.frame = frame
        self.results = results or []

    @classmethod
    def from_results(cls, results: Sequence[RunResult]) -> "CampaignSummary":
        if not results:
            return cls(pd.DataFrame(columns=SUMMARY_COLUMNS), [])
        runs = pd.DataFrame([asdict(r) for r in results])
        rows = []
        for key, group in runs.groupby(CELL_KEYS, sort=True, dropna=False):
            cell = dict(zip(CELL_KEYS, key))
            n = len(group)
            success = group[group["outcome"] == RunOutcome.SUCCESS.value]
            low, high = wilson_interval(len(success), n)
            validated = group["validated"].dropna()
            rows.append(
                {
                    **cell,
                    "extend_side": ",".join(sorted(group["extend_side"].unique())),
                    "runs": n,
                    "successes": len(success),
                    "success_rate": 100.0 * len(success) / n,
                    "ci_low": low,
                    "ci_high": high,
                    "ase_mean": success["success_epoch"].mean() if len(success) else float("nan"),
                    "ase_std": success["success_epoch"].std() if len(success) > 1 else float("nan"),
                    "mean_wall_s": group["wall_s"].mean(),
                    "solver_failures": int((group["outcome"] == RunOutcome.SOLVER_FAILED.value).sum()),
                    "validated": int(validated.astype(bool).sum()),
                    "flagged": int(group["flagged"].astype(bool).sum()),
                }
            )
        return cls(pd.DataFrame(rows, columns=SUMMARY_COLUMNS), list(results))

    @classmethod
    def from_directory(cls, root: Union[str, Path]) -> "CampaignSummary":
        """Recompute the summary from persisted run directories alone"""
        results = []
        for config_path in sorted(Path(root).rglob("config.json")):
            record = load_run(config_path.parent)
            block = record.metadata.get("campaign")
            if block is None:
                continue
            validation_path = config_path.parent / "validation.json"
            validated = None
            if validation_path.is_file():
                with open(validation_path) as f:
                    validated = bool(json.load(f)["passed"])
            results.append(
                RunResult(
                    experiment=block["experiment"],
                    d_in=block["d_in"],
                    d_out=block["d_out"],
                    k=block["k"],
                    epsilon=block["epsilon"],
                    gamma=block["gamma"],
                    mask=block["mask"],
                    seed=record.seed,
                    outcome=record.outcome.value,
                    success_epoch=record.success_epoch,
                    epochs=record.epochs,
                    wall_s=record.wall_seconds,
                    extend_side=record.metadata.get(
                        "extend_side_used", record.metadata.get("extend_side", "second")
                    ),
                    directory=str(config_path.parent),
                    validated=validated,
                    flagged=bool(record.metadata.get("violation", False)),
                )
            )
        return cls.from_results(results)

    def cell(self, epsilon: float, gamma: float) -> pd.Series:
        rows = self.frame[(self.frame["epsilon"] == epsilon) & (self.frame["gamma"] == gamma)]
        if rows.empty:
            raise InputError(f"No cell with epsilon={epsilon}, gamma={gamma}")
        return rows.iloc[0]

    @property
    def total_successes(self) -> int:
        return int(self.frame["successes"].sum()) if not self.frame.empty else 0

    def save(self, path: Union[str, Path]) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.frame.to_csv(p, index=False, float_format=FLOAT_FORMAT)
        return p


def run_campaign(
    spec: CampaignSpec,
    output_dir: Union[str, Path] = "runs",
    jobs: int = 1,
    solver_options: Optional[SolverOptions] = None,
    validation: Optional[ValidationSettings] = None,
    metrics=None,
) -> CampaignSummary:
    """
    Run every cell of a campaign and aggregate the results.

    Args:
        spec: Campaign definition
        output_dir: Root of the artifact tree
        jobs: Parallel worker processes; 1 runs inline
        solver_options: Solver settings shared by all runs
        validation: Thresholds for re-validating successful maps
        metrics: Optional RunMetrics, fed with run outcomes in this process

    Returns:
        CampaignSummary, also written to <output>/<experiment>/summary.csv
    """
    planned = plan_jobs(spec, output_dir, solver_options, validation)
    experiment_dir = Path(output_dir) / spec.experiment
    save_campaign_spec(spec, experiment_dir / "campaign.json")
    logger.info(
        f"Campaign {spec.experiment}: {len(planned)} runs over {len(spec.cells())} cells, {jobs} jobs"
    )

    results: List[RunResult] = []
    if jobs <= 1:
        for job in planned:
            results.append(execute_run(job))
            _progress(results, len(planned), metrics)
    else:
        with fut.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(execute_run, job): job for job in planned}
            for future in fut.as_completed(futures):
                job = futures[future]
                try:
                    results.append(future.result())
                except Exception as e:
                    logger.error(f"Worker for seed={job.seed} crashed: {str(e)}")
                    results.append(_crashed(job, str(e)))
                _progress(results, len(planned), metrics)

    results.sort(key=lambda r: (r.epsilon, r.gamma, r.mask, r.seed))
    summary = CampaignSummary.from_results(results)
    summary.save(experiment_dir / "summary.csv")
    logger.info(
        f"Campaign {spec.experiment} finished: {summary.total_successes}/{len(results)} successes",
        extra={"experiment": spec.experiment, "runs": len(results)},
    )
    return summary


def _progress(results: List[RunResult], total: int, metrics) -> None:
    last = results[-1]
    if metrics is not None:
        metrics.record_outcome(last.outcome)
    logger.info(
        f"[{len(results)}/{total}] seed={last.seed} eps={last.epsilon:g} "
        f"gamma={last.gamma:g}: {last.outcome}",
        extra={"seed": last.seed, "outcome": last.outcome, "success_epoch": last.success_epoch},
    )


def _crashed(job: RunJob, error: str) -> RunResult:
    return RunResult(
        experiment=job.spec.experiment,
        d_in=job.spec.d_in,
        d_out=job.spec.d_out,
        k=job.spec.k,
        epsilon=job.cell.epsilon,
        gamma=job.cell.gamma,
        mask=job.cell.mask or "none",
        seed=job.seed,
        outcome=RunOutcome.SOLVER_FAILED.value,
        success_epoch=None,
        epochs=0,
        wall_s=0.0,
        extend_side=job.solver_options.extend_side.value,
        directory=job.directory,
        error=error,
    )


def real_map_campaign(
    m: int,
    runs: int,
    masks: Optional[Sequence[Optional[str]]] = None,
    base: Optional[CampaignSpec] = None,
    output_dir: Union[str, Path] = "runs",
    jobs: int = 1,
    solver_options: Optional[SolverOptions] = None,
    validation: Optional[ValidationSettings] = None,
) -> CampaignSummary:
    """
    Search for real non-decomposable maps from 2 to m levels.

    Args:
        m: Output dimension; below 4 every positive map of this shape is decomposable
        runs: Runs per mask
        masks: Mask names or files; unmasked when omitted
        base: Template for the remaining settings

    Returns:
        CampaignSummary over the masks
    """
    if m < 4:
        raise InputError(
            f"Real maps from 2 to {m} levels are all decomposable; real-map searches need m >= 4"
        )
    template = base or CampaignSpec(experiment=f"real_m{m}")
    spec = template.model_copy(
        update={
            "kind": CampaignKind.MAIN,
            "d_in": 2,
            "d_out": m,
            "runs": runs,
            "real": True,
            "masks": list(masks) if masks else [None],
        }
    )
    return run_campaign(spec, output_dir, jobs, solver_options, validation)
