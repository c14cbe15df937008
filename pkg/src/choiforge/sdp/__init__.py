from .certificates import (
    Certificate,
    CertificateEngine,
    build_extension_problem,
    certify_non_decomposable,
    certify_positive_on_relaxation,
    zeta1,
    zeta_k,
)
from .conic import ConicProblem, CvxpySolver, ExtendSide, SolveStatus, SolverOptions

__all__ = [
    'Certificate',
    'CertificateEngine',
    'ConicProblem',
    'CvxpySolver',
    'ExtendSide',
    'SolveStatus',
    'SolverOptions',
    'build_extension_problem',
    'certify_non_decomposable',
    'certify_positive_on_relaxation',
    'zeta1',
    'zeta_k',
]
