from .decomposable import (
    DecomposableSpec,
    DilationParams,
    decomposable_choi,
    kraus_from_dilation,
    train_non_cp_decomposable,
)
from .ppt_square import PptMapSpec, ppt_choi, ppt_penalty, ppt_square_run

__all__ = [
    'DecomposableSpec',
    'DilationParams',
    'PptMapSpec',
    'decomposable_choi',
    'kraus_from_dilation',
    'ppt_choi',
    'ppt_penalty',
    'ppt_square_run',
    'train_non_cp_decomposable',
]
