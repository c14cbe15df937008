from .tensor_core import (
    HermitianOperator,
    SubsystemDims,
    eig_general,
    eigh,
    herm_to_real_embed,
    kron,
    matrix_exp,
    matrix_exp_derivative,
    max_ent_vector,
    partial_trace,
    partial_transpose,
    permutation_operator,
    reshuffle,
    reshuffle_adjoint,
    reshuffle_gradient,
    unreshuffle,
)

__all__ = [
    'HermitianOperator',
    'SubsystemDims',
    'eig_general',
    'eigh',
    'herm_to_real_embed',
    'kron',
    'matrix_exp',
    'matrix_exp_derivative',
    'max_ent_vector',
    'partial_trace',
    'partial_transpose',
    'permutation_operator',
    'reshuffle',
    'reshuffle_adjoint',
    'reshuffle_gradient',
    'unreshuffle',
]
