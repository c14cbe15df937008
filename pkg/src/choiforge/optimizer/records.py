"""
Run records and their on-disk layout.
A run directory holds record.csv (one row per epoch), config.json (run
metadata) and choi.json (final Choi matrix).
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from choiforge.choi.choi_matrix import ChoiMatrix
from choiforge.choi.io import load_choi, save_choi
from choiforge.exceptions import InputError

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ["epoch", "loss", "zeta1", "zetak", "xi", "wall_s"]
FLOAT_FORMAT = "%.17g"


class RunOutcome(Enum):
    """Terminal state of a training run"""

    SUCCESS = "success"
    EXHAUSTED = "exhausted"
    SOLVER_FAILED = "solver_failed"

    @property
    def exit_code(self) -> int:
        return {RunOutcome.SUCCESS: 0, RunOutcome.EXHAUSTED: 2, RunOutcome.SOLVER_FAILED: 3}[self]


@dataclass
class EpochRow:
    epoch: int
    loss: float
    zeta1: float
    zetak: float
    xi: float = float("nan")
    wall_s: float = 0.0


@dataclass
class RunRecord:
    """Per-epoch trace and final state of one run"""

    rows: List[EpochRow]
    outcome: RunOutcome
    success_epoch: Optional[int]
    final_choi: Optional[ChoiMatrix]
    seed: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return self.outcome is RunOutcome.SUCCESS

    @property
    def epochs(self) -> int:
        return len(self.rows)

    @property
    def wall_seconds(self) -> float:
        return self.rows[-1].wall_s if self.rows else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.epoch, r.loss, r.zeta1, r.zetak, r.xi, r.wall_s] for r in self.rows],
            columns=RECORD_COLUMNS,
        )

    def trajectory(self) -> pd.DataFrame:
        """Epoch table without wall time; equal for two runs with the same seed"""
        return self.to_frame().drop(columns=["wall_s"])

    def same_trajectory(self, other: "RunRecord") -> bool:
        """True when both runs took identical steps and ended on the same Choi matrix"""
        if self.outcome is not other.outcome or self.success_epoch != other.success_epoch:
            return False
        if not self.trajectory().equals(other.trajectory()):
            return False
        if (self.final_choi is None) != (other.final_choi is None):
            return False
        return self.final_choi is None or bool(np.array_equal(self.final_choi.array, other.final_choi.array))

    def sidecar(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "outcome": self.outcome.value,
            "success_epoch": self.success_epoch,
            "epochs": self.epochs,
            **self.metadata,
        }


def save_run(record: RunRecord, directory: Union[str, Path]) -> Path:
    """Write record.csv, config.json and (when present) choi.json"""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    record.to_frame().to_csv(out / "record.csv", index=False, float_format=FLOAT_FORMAT)
    with open(out / "config.json", "w") as f:
        json.dump(record.sidecar(), f, indent=2, default=str)
    if record.final_choi is not None:
        save_choi(record.final_choi, out / "choi.json")
    logger.debug(f"Saved run (seed {record.seed}, {record.outcome.value}) to {out}")
    return out


def load_run(directory: Union[str, Path]) -> RunRecord:
    """Read a run directory written by save_run"""
    src = Path(directory)
    if not (src / "record.csv").is_file() or not (src / "config.json").is_file():
        raise InputError(f"{src} is not a run directory")
    frame = pd.read_csv(src / "record.csv", dtype={"epoch": int}, float_precision="round_trip")
    rows = [
        EpochRow(int(r.epoch), float(r.loss), float(r.zeta1), float(r.zetak), float(r.xi), float(r.wall_s))
        for r in frame.itertuples(index=False)
    ]
    with open(src / "config.json") as f:
        sidecar = json.load(f)
    choi_path = src / "choi.json"
    final = load_choi(choi_path) if choi_path.is_file() else None
    known = {"seed", "outcome", "success_epoch", "epochs"}
    return RunRecord(
        rows=rows,
        outcome=RunOutcome(sidecar["outcome"]),
        success_epoch=sidecar.get("success_epoch"),
        final_choi=final,
        seed=int(sidecar.get("seed", 0)),
        metadata={k: v for k, v in sidecar.items() if k not in known},
    )


def nan_to_none(value: float) -> Optional[float]:
    return None if value is None or np.isnan(value) else float(value)
