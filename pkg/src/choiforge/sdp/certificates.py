"""
Certificates for positive maps from PPT symmetric-extension programs.

zeta_1(C) = min Tr(sigma C) over PPT states. A negative value certifies that
the map with Choi matrix C is not decomposable.
zeta_k(C) = min Tr(rho~ C) over reductions rho~ of PPT k-symmetric extensions.
A non-negative value certifies that the map is positive.

Both values are minima of functions linear in C, so the optimal witness is a
subgradient of the value with respect to C.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from choiforge.choi.choi_matrix import ChoiMatrix
from choiforge.core.tensor_core import HermitianOperator
from choiforge.exceptions import InputError, SolverFailure
from choiforge.sdp.conic import (
    ConicProblem,
    ConicSolver,
    CvxpySolver,
    ExtendSide,
    SolveStatus,
    SolverOptions,
    build_conic_problem,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Certificate:
    """Optimal value and witness of one certificate program"""

    value: float
    witness: Optional[HermitianOperator]
    status: SolveStatus
    k: int
    solve_seconds: float
    extend_side: ExtendSide = ExtendSide.SECOND

    @property
    def ok(self) -> bool:
        return self.status.usable


def _swap_bipartite(matrix: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """Exchange the tensor factors of an operator on C^d1 (x) C^d2"""
    return matrix.reshape(d1, d2, d1, d2).transpose(1, 0, 3, 2).reshape(matrix.shape)


def resolve_extend_side(choi: ChoiMatrix, side: ExtendSide) -> ExtendSide:
    """AUTO extends the smaller subsystem, the output one on ties"""
    if side is not ExtendSide.AUTO:
        return side
    return ExtendSide.SECOND if choi.d_out <= choi.d_in else ExtendSide.FIRST


class CertificateEngine:
    """
    Solves certificate programs, reusing one compiled problem per shape.
    An engine belongs to a single run and is not shared between threads.
    """

    def __init__(
        self,
        options: Optional[SolverOptions] = None,
        solver: Optional[ConicSolver] = None,
        metrics=None,
    ):
        """
        Initialize certificate engine.

        Args:
            options: Solver settings
            solver: Conic solver (cvxpy with the configured backend by default)
            metrics: Optional RunMetrics receiving solve counts and durations
        """
        self.options = options or SolverOptions()
        self.solver = solver or CvxpySolver(self.options)
        self.metrics = metrics
        self._problems: Dict[Tuple[int, int, int], ConicProblem] = {}

    def problem(self, d_a: int, d_b: int, k: int) -> ConicProblem:
        key = (d_a, d_b, k)
        if key not in self._problems:
            self._problems[key] = build_conic_problem(
                d_a, d_b, k, self.options.max_extension_dim
            )
        return self._problems[key]

    def zeta(self, choi: ChoiMatrix, k: int) -> Certificate:
        """
        Solve the level-k program for choi.

        Args:
            choi: Choi matrix of the map
            k: Level; 1 is the PPT relaxation

        Returns:
            Certificate; a failed solve carries value NaN and no witness
        """
        if k < 1:
            raise InputError(f"Hierarchy level must be at least 1, got {k}")
        side = resolve_extend_side(choi, self.options.extend_side) if k > 1 else ExtendSide.SECOND
        target = choi.swap_subsystems() if side is ExtendSide.FIRST else choi

        problem = self.problem(target.d_in, target.d_out, k)
        problem.bind(target.array)
        result = self.solver.solve(problem)
        self._record(k, result.status, result.seconds)

        if not result.status.usable:
            logger.warning(f"zeta_{k} solve ended with status {result.status.value}: {result.message}")
            return Certificate(float("nan"), None, result.status, k, result.seconds, side)

        _, reduced = problem.witness()
        if side is ExtendSide.FIRST:
            reduced = _swap_bipartite(reduced, target.d_in, target.d_out)
        return Certificate(
            value=result.value,
            witness=HermitianOperator(reduced),
            status=result.status,
            k=k,
            solve_seconds=result.seconds,
            extend_side=side,
        )

    def _record(self, k: int, status: SolveStatus, seconds: float) -> None:
        if self.metrics is not None:
            kind = "zeta1" if k == 1 else "zetak"
            self.metrics.record_solve(kind, status.value, seconds)


def _engine(options: Optional[SolverOptions], engine: Optional[CertificateEngine]) -> CertificateEngine:
    return engine or CertificateEngine(options)


def zeta1(
    choi: ChoiMatrix,
    options: Optional[SolverOptions] = None,
    engine: Optional[CertificateEngine] = None,
) -> Certificate:
    """Minimum of Tr(sigma C) over PPT states sigma"""
    return _engine(options, engine).zeta(choi, 1)


def zeta_k(
    choi: ChoiMatrix,
    k: int,
    options: Optional[SolverOptions] = None,
    engine: Optional[CertificateEngine] = None,
) -> Certificate:
    """Minimum of Tr(rho~ C) over reductions of PPT k-symmetric extensions"""
    if k < 2:
        raise InputError(f"zeta_k needs k >= 2, got {k}")
    return _engine(options, engine).zeta(choi, k)


def build_extension_problem(
    choi: ChoiMatrix, k: int, options: Optional[SolverOptions] = None
) -> ConicProblem:
    """Bound (unsolved) level-k program for choi, extended on the configured side"""
    opts = options or SolverOptions()
    side = resolve_extend_side(choi, opts.extend_side) if k > 1 else ExtendSide.SECOND
    target = choi.swap_subsystems() if side is ExtendSide.FIRST else choi
    problem = build_conic_problem(target.d_in, target.d_out, k, opts.max_extension_dim)
    problem.bind(target.array)
    return problem


def _require(cert: Certificate) -> Certificate:
    if not cert.ok:
        raise SolverFailure(f"zeta_{cert.k} solve failed with status {cert.status.value}")
    return cert


def certify_non_decomposable(
    choi: ChoiMatrix,
    options: Optional[SolverOptions] = None,
    engine: Optional[CertificateEngine] = None,
) -> Tuple[bool, float]:
    """
    Non-decomposability verdict.

    Returns:
        (zeta_1 < -cert_tol, margin -zeta_1)
    """
    eng = _engine(options, engine)
    cert = _require(eng.zeta(choi, 1))
    return cert.value < -eng.options.cert_tol, -cert.value


def certify_positive_on_relaxation(
    choi: ChoiMatrix,
    k: int,
    options: Optional[SolverOptions] = None,
    engine: Optional[CertificateEngine] = None,
) -> Tuple[bool, float]:
    """
    Positivity verdict from the level-k relaxation; sufficient, not necessary.

    Returns:
        (zeta_k >= -cert_tol, margin zeta_k)
    """
    if k < 2:
        raise InputError(f"Positivity certificate needs k >= 2, got {k}")
    eng = _engine(options, engine)
    cert = _require(eng.zeta(choi, k))
    return cert.value >= -eng.options.cert_tol, cert.value
