from .choi_matrix import (
    ChoiMatrix,
    apply_map,
    choi_from_kraus,
    choi_map_family,
    compose_choi,
    depolarizing_choi,
    identity_choi,
    transposition_choi,
)
from .family import FamilyParams, family_choi
from .masks import builtin_mask, resolve_mask
from .params import ChoiParams, TpMode, build_choi, init_params
from .probe import block_positivity_probe

__all__ = [
    'ChoiMatrix',
    'ChoiParams',
    'FamilyParams',
    'TpMode',
    'apply_map',
    'block_positivity_probe',
    'build_choi',
    'builtin_mask',
    'choi_from_kraus',
    'choi_map_family',
    'compose_choi',
    'depolarizing_choi',
    'family_choi',
    'identity_choi',
    'init_params',
    'resolve_mask',
    'transposition_choi',
]
