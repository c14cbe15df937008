"""
Named campaign presets.
Desk-scale versions of the reference experiments: runs per cell default to 20
(full-scale cells use up to 200), every other hyperparameter matches.
"""

from typing import Callable, Dict, List

from choiforge.campaigns.spec import CampaignKind, CampaignSpec
from choiforge.exceptions import InputError
from choiforge.optimizer.losses import LossConfig, LossMode
from choiforge.optimizer.train import TrainConfig

SWEEP_EPSILONS = [0.01, 0.05, 0.1, 0.2]
SWEEP_GAMMAS = [0.5, 1.0, 2.0, 4.0]
TABLE_CELLS = [(2, 4), (4, 2), (3, 3), (4, 4)]


def _table_cell(d_in: int, d_out: int) -> Callable[[int], CampaignSpec]:
    def build(runs: int) -> CampaignSpec:
        return CampaignSpec(
            experiment=f"table_{d_in}x{d_out}", d_in=d_in, d_out=d_out, runs=runs, tp=False
        )

    return build


def _sweep(runs: int) -> CampaignSpec:
    return CampaignSpec(
        experiment="sweep", runs=runs, epsilons=SWEEP_EPSILONS, gammas=SWEEP_GAMMAS, tp=False
    )


def _real(m: int) -> Callable[[int], CampaignSpec]:
    def build(runs: int) -> CampaignSpec:
        return CampaignSpec(experiment=f"real_m{m}", d_in=2, d_out=m, runs=runs, real=True)

    return build


def _bound(runs: int) -> CampaignSpec:
    return CampaignSpec(
        experiment="bound",
        kind=CampaignKind.BOUND,
        d_in=3,
        d_out=3,
        runs=runs,
        loss=LossConfig(mode=LossMode.BOUND),
        tp=True,
    )


def _masked(runs: int) -> CampaignSpec:
    return CampaignSpec(
        experiment="masked_4x4", d_in=4, d_out=4, runs=runs, masks=["random:0.5"]
    )


def _decomposable(runs: int) -> CampaignSpec:
    return CampaignSpec(
        experiment="decomposable",
        kind=CampaignKind.DECOMPOSABLE,
        d_in=3,
        d_out=3,
        runs=runs,
        train=TrainConfig(max_epochs=500),
    )


def _pptsq(runs: int) -> CampaignSpec:
    return CampaignSpec(
        experiment="pptsq", kind=CampaignKind.PPT_SQUARE, d_in=2, d_out=4, runs=runs
    )


PRESETS: Dict[str, Callable[[int], CampaignSpec]] = {
    **{f"table-{a}x{b}": _table_cell(a, b) for a, b in TABLE_CELLS},
    "sweep": _sweep,
    "real-m4": _real(4),
    "real-m5": _real(5),
    "bound": _bound,
    "masked-4x4": _masked,
    "decomposable": _decomposable,
    "pptsq": _pptsq,
}


def preset_names() -> List[str]:
    return sorted(PRESETS)


def preset(name: str, runs: int = 20) -> CampaignSpec:
    """Campaign spec of a named preset with the given runs per cell"""
    if name not in PRESETS:
        raise InputError(f"Unknown preset {name!r}; choose from {', '.join(preset_names())}")
    return PRESETS[name](runs)
