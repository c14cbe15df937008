"""
Plot-ready exports of run traces.
Writes long-format CSVs (one row per run and epoch) that any plotting tool
can pivot, plus one diagnostic row per run.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from choiforge.optimizer.records import FLOAT_FORMAT, RunRecord, load_run

logger = logging.getLogger(__name__)

KEY_COLUMNS = ["experiment", "epsilon", "gamma", "seed"]
LOSS_COLUMNS = KEY_COLUMNS + ["epoch", "loss"]
ZETA_COLUMNS = KEY_COLUMNS + ["epoch", "zeta1", "zetak", "xi"]
DIAGNOSTIC_COLUMNS = KEY_COLUMNS + [
    "outcome",
    "success_epoch",
    "epochs",
    "first_zetak_nonneg_epoch",
    "last_zeta1_below_margin_epoch",
]


def _labels(record: RunRecord) -> Dict[str, Any]:
    block = record.metadata.get("campaign")
    loss = record.metadata.get("loss", {})
    if block is not None:
        experiment, epsilon, gamma = block["experiment"], block["epsilon"], block["gamma"]
    else:
        experiment = record.metadata.get("experiment", "run")
        epsilon, gamma = loss.get("epsilon", np.nan), loss.get("gamma", np.nan)
    return {"experiment": experiment, "epsilon": epsilon, "gamma": gamma, "seed": record.seed}


def _first_epoch(epochs: np.ndarray, condition: np.ndarray) -> Optional[int]:
    hits = epochs[condition]
    return int(hits[0]) if hits.size else None


def _last_epoch(epochs: np.ndarray, condition: np.ndarray) -> Optional[int]:
    hits = epochs[condition]
    return int(hits[-1]) if hits.size else None


def export_plot_data(
    records: Sequence[RunRecord], output_dir: Union[str, Path]
) -> Dict[str, Path]:
    """
    Write loss_traces.csv, zeta_traces.csv and diagnostics.csv.

    The diagnostics give, per run, the first epoch with zeta_k >= 0 and the
    last epoch with zeta_1 <= -epsilon.

    Args:
        records: Run records, labelled through their metadata
        output_dir: Target directory

    Returns:
        Mapping from table name to written path
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    loss_frames: List[pd.DataFrame] = []
    zeta_frames: List[pd.DataFrame] = []
    diagnostics = []

    for record in records:
        labels = _labels(record)
        trace = record.to_frame()
        for name, value in labels.items():
            trace[name] = value
        loss_frames.append(trace[LOSS_COLUMNS])
        zeta_frames.append(trace[ZETA_COLUMNS])

        epochs = trace["epoch"].to_numpy()
        epsilon = labels["epsilon"]
        diagnostics.append(
            {
                **labels,
                "outcome": record.outcome.value,
                "success_epoch": record.success_epoch,
                "epochs": record.epochs,
                "first_zetak_nonneg_epoch": _first_epoch(epochs, trace["zetak"].to_numpy() >= 0),
                "last_zeta1_below_margin_epoch": _last_epoch(
                    epochs, trace["zeta1"].to_numpy() <= -epsilon
                ),
            }
        )

    tables = {
        "loss_traces": _concat(loss_frames, LOSS_COLUMNS),
        "zeta_traces": _concat(zeta_frames, ZETA_COLUMNS),
        "diagnostics": pd.DataFrame(diagnostics, columns=DIAGNOSTIC_COLUMNS),
    }
    paths = {}
    for name, frame in tables.items():
        paths[name] = out / f"{name}.csv"
        frame.to_csv(paths[name], index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Exported traces of {len(records)} runs to {out}")
    return paths


def _concat(frames: List[pd.DataFrame], columns: List[str]) -> pd.DataFrame:
    if not frames:
        return pd.DataFrame(columns=columns)
    return pd.concat(frames, ignore_index=True)


def load_campaign_records(root: Union[str, Path]) -> List[RunRecord]:
    """Every run directory below root, in path order"""
    return [load_run(p.parent) for p in sorted(Path(root).rglob("record.csv"))]
