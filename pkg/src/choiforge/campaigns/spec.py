"""
Campaign specifications.
A campaign is a grid of loss hyperparameters (and masks) crossed with a fixed
number of seeded runs per cell. Specs load from JSON or YAML files.
"""

import itertools
import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from choiforge.choi.params import TpMode
from choiforge.exceptions import InputError
from choiforge.optimizer.losses import LossConfig, LossMode
from choiforge.optimizer.train import TrainConfig
from choiforge.sdp.conic import ExtendSide

logger = logging.getLogger(__name__)


class CampaignKind(Enum):
    """What every run of a campaign trains"""

    MAIN = "main"
    BOUND = "bound"
    DECOMPOSABLE = "decomposable"
    PPT_SQUARE = "ppt_square"


class CampaignSpec(BaseModel):
    """Grid and run template of one campaign"""

    experiment: str = Field(..., min_length=1, description="Tag naming the artifact directory")
    kind: CampaignKind = Field(default=CampaignKind.MAIN, description="Run type")
    d_in: int = Field(default=3, ge=1, description="Input dimension")
    d_out: int = Field(default=3, ge=1, description="Output dimension")
    k: int = Field(default=2, ge=2, description="Positivity certificate level")
    runs: int = Field(default=20, ge=1, description="Seeded runs per cell")
    base_seed: int = Field(default=0, ge=0, description="Run i uses base_seed + i")
    epsilons: List[float] = Field(default_factory=lambda: [0.05], min_length=1)
    gammas: List[float] = Field(default_factory=lambda: [2.0], min_length=1)
    masks: List[Optional[str]] = Field(
        default_factory=lambda: [None], min_length=1, description="Mask names or files"
    )
    loss: LossConfig = Field(default_factory=LossConfig, description="Loss template")
    train: TrainConfig = Field(default_factory=TrainConfig, description="Optimizer template")
    tp: bool = Field(default=False, description="Trace-preserving parametrization")
    tp_mode: TpMode = Field(default=TpMode.EXACT, description="Exact elimination or penalty")
    real: bool = Field(default=False, description="Real Choi matrices")
    extend_side: Optional[ExtendSide] = Field(
        default=None, description="Override of the configured extension side"
    )
    ancilla_dim: Optional[int] = Field(default=None, ge=1, description="Dilation ancilla")
    ppt_penalty_weight: float = Field(default=10.0, ge=0, description="PPT hinge weight")
    validate_finds: bool = Field(default=True, description="Re-validate successful maps")

    @model_validator(mode="after")
    def check_kind(self) -> "CampaignSpec":
        if self.kind in (CampaignKind.BOUND, CampaignKind.DECOMPOSABLE) and self.d_in != self.d_out:
            raise ValueError(f"{self.kind.value} campaigns need d_in = d_out")
        if self.real and self.kind is not CampaignKind.MAIN:
            raise ValueError("real maps are only searched in main campaigns")
        return self

    @property
    def loss_mode(self) -> LossMode:
        return {
            CampaignKind.MAIN: LossMode.MAIN,
            CampaignKind.BOUND: LossMode.BOUND,
            CampaignKind.DECOMPOSABLE: LossMode.DECOMPOSABLE_GEN,
            CampaignKind.PPT_SQUARE: LossMode.PPT_SQUARE,
        }[self.kind]

    def cells(self) -> List["CampaignCell"]:
        grid = itertools.product(self.epsilons, self.gammas, enumerate(self.masks))
        return [
            CampaignCell(epsilon, gamma, mask, mask_index)
            for epsilon, gamma, (mask_index, mask) in grid
        ]

    def seeds(self) -> List[int]:
        return [self.base_seed + i for i in range(self.runs)]

    def loss_for(self, cell: "CampaignCell") -> LossConfig:
        return self.loss.model_copy(
            update={"epsilon": cell.epsilon, "gamma": cell.gamma, "k": self.k, "mode": self.loss_mode}
        )

    def train_for(self, seed: int) -> TrainConfig:
        return self.train.model_copy(update={"seed": seed})


@dataclass(frozen=True)
class CampaignCell:
    """One grid point"""

    epsilon: float
    gamma: float
    mask: Optional[str] = None
    mask_index: int = 0

    @property
    def tag(self) -> str:
        tag = f"eps{self.epsilon:g}_gamma{self.gamma:g}"
        return tag if self.mask is None else f"{tag}_mask{self.mask_index}"


def load_campaign_spec(path: Union[str, Path]) -> CampaignSpec:
    """Read a campaign spec from .json, .yaml or .yml"""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"Campaign spec not found: {p}")
    try:
        with open(p) as f:
            data = yaml.safe_load(f) if p.suffix in (".yaml", ".yml") else json.load(f)
        return CampaignSpec.model_validate(data)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise InputError(f"Malformed campaign spec {p}: {str(e)}")
    except ValidationError as e:
        raise InputError(f"Invalid campaign spec {p}: {str(e)}")


def save_campaign_spec(spec: CampaignSpec, path: Union[str, Path]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w") as f:
        json.dump(spec.model_dump(mode="json"), f, indent=2)
    return p
