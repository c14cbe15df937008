from .adam import Adam, AdamState, adam_step
from .losses import LossConfig, LossMode, evaluate_loss, loss_bound, loss_main
from .records import EpochRow, RunOutcome, RunRecord, load_run, save_run
from .subgradient import choi_gradient, subgradient
from .train import TrainConfig, random_init, train_loop
from .xi import BoundReport, bound_report, xi, xi_gradient

__all__ = [
    'Adam',
    'AdamState',
    'BoundReport',
    'EpochRow',
    'LossConfig',
    'LossMode',
    'RunOutcome',
    'RunRecord',
    'TrainConfig',
    'adam_step',
    'bound_report',
    'choi_gradient',
    'evaluate_loss',
    'load_run',
    'loss_bound',
    'loss_main',
    'random_init',
    'save_run',
    'subgradient',
    'train_loop',
    'xi',
    'xi_gradient',
]
