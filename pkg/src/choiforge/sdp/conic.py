"""
Conic programs for the PPT symmetric-extension certificates.

Hermitian variables are carried through the real embedding
[[S, -A], [A, S]] with S = Re(sigma), A = Im(sigma), so every PSD constraint
lands on a real PSD cone. The objective coefficients Re C and Im C are cvxpy
Parameters, which lets one compiled problem be re-solved for each new Choi
matrix of the same shape.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Protocol, Tuple

import cvxpy as cp
import numpy as np

from choiforge.core.tensor_core import (
    SubsystemDims,
    eigh,
    partial_trace,
    partial_transpose,
    permutation_operator,
)
from choiforge.exceptions import CapacityError, InputError

logger = logging.getLogger(__name__)

DEFAULT_MAX_EXTENSION_DIM = 256


class ExtendSide(Enum):
    """Subsystem carrying the symmetric extension"""

    FIRST = "first"
    SECOND = "second"
    AUTO = "auto"  # the smaller of the two


class SolveStatus(Enum):
    """Outcome of one conic solve"""

    OPTIMAL = "optimal"
    INACCURATE = "inaccurate"
    INFEASIBLE = "infeasible"
    FAILED = "failed"

    @property
    def usable(self) -> bool:
        return self in (SolveStatus.OPTIMAL, SolveStatus.INACCURATE)


@dataclass(frozen=True)
class SolverOptions:
    """Solver settings shared by every certificate"""

    solver: str = "CLARABEL"
    feasibility_tol: float = 1e-8
    duality_gap_tol: float = 1e-8
    max_iterations: int = 200
    extend_side: ExtendSide = ExtendSide.SECOND
    cert_tol: float = 1e-7
    max_extension_dim: int = DEFAULT_MAX_EXTENSION_DIM

    def __post_init__(self):
        if min(self.feasibility_tol, self.duality_gap_tol, self.cert_tol) <= 0:
            raise InputError("Solver tolerances must be positive")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be at least 1")
        if not isinstance(self.extend_side, ExtendSide):
            object.__setattr__(self, "extend_side", ExtendSide(self.extend_side))

    def with_extend_side(self, side: ExtendSide) -> "SolverOptions":
        return replace(self, extend_side=side)

    def solver_kwargs(self) -> Dict[str, Any]:
        """Translate tolerances into the named solver's keyword arguments"""
        name = self.solver.upper()
        if name == "CLARABEL":
            return {
                "tol_feas": self.feasibility_tol,
                "tol_gap_abs": self.duality_gap_tol,
                "tol_gap_rel": self.duality_gap_tol,
                "max_iter": self.max_iterations,
            }
        if name == "SCS":
            return {
                "eps_abs": self.feasibility_tol,
                "eps_rel": self.duality_gap_tol,
                "max_iters": max(self.max_iterations, 10_000),
            }
        if name == "CVXOPT":
            return {
                "feastol": self.feasibility_tol,
                "abstol": self.duality_gap_tol,
                "reltol": self.duality_gap_tol,
                "max_iters": self.max_iterations,
            }
        return {}


@dataclass
class SolveResult:
    status: SolveStatus
    value: float
    seconds: float
    message: str = ""


@dataclass
class ConicProblem:
    """
    Compiled extension problem min Tr(rho~ C) over PPT k-symmetric extensions.

    Attributes:
        d_a: Dimension of the unextended subsystem
        d_b: Dimension of each extended slot
        k: Number of B slots
        problem: cvxpy problem over the embedded variable
        re_c, im_c: Parameters holding Re C and Im C
        sigma_re, sigma_im: Expressions for Re sigma and Im sigma
        reduced_re, reduced_im: Expressions for the reduced state on A (x) B_1
    """

    d_a: int
    d_b: int
    k: int
    problem: cp.Problem
    re_c: cp.Parameter
    im_c: cp.Parameter
    sigma_re: cp.Expression
    sigma_im: cp.Expression
    reduced_re: cp.Expression
    reduced_im: cp.Expression
    symmetry_generators: List[np.ndarray] = field(default_factory=list)

    @property
    def dims(self) -> SubsystemDims:
        return SubsystemDims((self.d_a,) + (self.d_b,) * self.k)

    @property
    def variable_dim(self) -> int:
        return self.dims.total

    @property
    def embedded_dim(self) -> int:
        return 2 * self.variable_dim

    @property
    def symmetry_constraint_sets(self) -> int:
        return len(self.symmetry_generators)

    @property
    def ppt_cones(self) -> int:
        return self.k

    def bind(self, choi_matrix: np.ndarray) -> None:
        """Load a Choi matrix on A (x) B into the objective parameters"""
        m = np.asarray(choi_matrix)
        n = self.d_a * self.d_b
        if m.shape != (n, n):
            raise InputError(f"Choi matrix of shape {m.shape} does not fit problem dims {n}")
        self.re_c.value = np.ascontiguousarray(m.real)
        self.im_c.value = np.ascontiguousarray(m.imag)

    def witness(self) -> Tuple[np.ndarray, np.ndarray]:
        """(full extension sigma, reduced state) from the last solve"""
        sigma = self.sigma_re.value + 1j * self.sigma_im.value
        reduced = self.reduced_re.value + 1j * self.reduced_im.value
        return sigma, reduced

    def residuals(self, sigma: np.ndarray) -> Dict[str, float]:
        """
        Constraint violations of a numeric candidate sigma.
        Eigenvalue entries report the most negative eigenvalue (0 when PSD).
        """
        s = np.asarray(sigma)
        report = {
            "trace": abs(float(np.trace(s).real) - 1.0),
            "hermitian": float(np.max(np.abs(s - s.conj().T))),
            "psd": max(0.0, -float(eigh((s + s.conj().T) / 2)[0][0])),
        }
        symmetry = 0.0
        for p in self.symmetry_generators:
            symmetry = max(symmetry, float(np.max(np.abs(p @ s @ p.T - s))))
        report["symmetry"] = symmetry
        for l in range(1, self.k + 1):
            pt = partial_transpose(s, self.dims, range(1, l + 1))
            report[f"ppt_{l}"] = max(0.0, -float(eigh((pt + pt.conj().T) / 2)[0][0]))
        return report


def _reduce(expr: cp.Expression, d_a: int, d_b: int, k: int) -> cp.Expression:
    """Trace out B_2..B_k of an expression on A (x) B^k"""
    dims = [d_a] + [d_b] * k
    for axis in range(k, 1, -1):
        expr = cp.partial_trace(expr, dims, axis=axis)
        dims.pop()
    return expr


def _transpose_b_slots(expr: cp.Expression, d_a: int, d_b: int, k: int, l: int) -> cp.Expression:
    """Partial transpose over B_1..B_l"""
    dims = [d_a] + [d_b] * k
    for axis in range(1, l + 1):
        expr = cp.partial_transpose(expr, dims, axis=axis)
    return expr


def build_conic_problem(
    d_a: int, d_b: int, k: int, max_extension_dim: int = DEFAULT_MAX_EXTENSION_DIM
) -> ConicProblem:
    """
    Assemble the PPT k-symmetric extension program on A (x) B_1 (x) ... (x) B_k.

    Args:
        d_a: Dimension of A
        d_b: Dimension of every B slot
        k: Extension level (k = 1 gives the plain PPT set)
        max_extension_dim: Largest allowed d_a * d_b^k

    Returns:
        Unbound ConicProblem
    """
    if k < 1:
        raise InputError(f"Extension level must be at least 1, got {k}")
    n = d_a * d_b**k
    if n > max_extension_dim:
        raise CapacityError(
            f"Extension space of dimension {n} (d_a={d_a}, d_b={d_b}, k={k}) "
            f"exceeds the limit {max_extension_dim}"
        )

    z = cp.Variable((2 * n, 2 * n), PSD=True)
    sigma_re = z[:n, :n]
    sigma_im = z[n:, :n]
    constraints = [
        z[:n, :n] == z[n:, n:],
        z[:n, n:] == -z[n:, :n],
        cp.trace(sigma_re) == 1,
    ]

    dims = [d_a] + [d_b] * k
    generators = []
    for slot in range(k - 1):
        perm = list(range(k))
        perm[slot], perm[slot + 1] = perm[slot + 1], perm[slot]
        p = permutation_operator(perm, dims)
        generators.append(p)
        constraints += [p @ sigma_re @ p.T == sigma_re, p @ sigma_im @ p.T == sigma_im]

    for l in range(1, k + 1):
        pt_re = _transpose_b_slots(sigma_re, d_a, d_b, k, l)
        pt_im = _transpose_b_slots(sigma_im, d_a, d_b, k, l)
        slack = cp.Variable((2 * n, 2 * n), PSD=True)
        constraints += [slack[:n, :n] == pt_re, slack[n:, n:] == pt_re,
                        slack[n:, :n] == pt_im, slack[:n, n:] == -pt_im]

    reduced_re = _reduce(sigma_re, d_a, d_b, k)
    reduced_im = _reduce(sigma_im, d_a, d_b, k)
    m = d_a * d_b
    re_c = cp.Parameter((m, m), name="re_c")
    im_c = cp.Parameter((m, m), name="im_c")
    # Tr(rho C) = sum(Re rho * Re C) + sum(Im rho * Im C) for Hermitian rho, C
    objective = cp.Minimize(
        cp.sum(cp.multiply(reduced_re, re_c)) + cp.sum(cp.multiply(reduced_im, im_c))
    )
    problem = cp.Problem(objective, constraints)
    logger.debug(
        f"Built extension problem d_a={d_a}, d_b={d_b}, k={k}: "
        f"embedded dim {2 * n}, {len(constraints)} constraint groups"
    )
    return ConicProblem(
        d_a=d_a,
        d_b=d_b,
        k=k,
        problem=problem,
        re_c=re_c,
        im_c=im_c,
        sigma_re=sigma_re,
        sigma_im=sigma_im,
        reduced_re=reduced_re,
        reduced_im=reduced_im,
        symmetry_generators=generators,
    )


class ConicSolver(Protocol):
    """Anything that solves a bound ConicProblem in place"""

    def solve(self, problem: ConicProblem) -> SolveResult: ...


_STATUS_MAP = {
    cp.OPTIMAL: SolveStatus.OPTIMAL,
    cp.OPTIMAL_INACCURATE: SolveStatus.INACCURATE,
    cp.INFEASIBLE: SolveStatus.INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: SolveStatus.INFEASIBLE,
}


class CvxpySolver:
    """Interior-point solve through cvxpy (Clarabel unless configured otherwise)"""

    def __init__(self, options: Optional[SolverOptions] = None):
        self.options = options or SolverOptions()

    def solve(self, problem: ConicProblem) -> SolveResult:
        start = time.perf_counter()
        try:
            problem.problem.solve(
                solver=self.options.solver.upper(), **self.options.solver_kwargs()
            )
        except (cp.error.SolverError, ValueError, ArithmeticError) as e:
            elapsed = time.perf_counter() - start
            logger.warning(f"Solver {self.options.solver} failed: {str(e)}")
            return SolveResult(SolveStatus.FAILED, float("nan"), elapsed, str(e))

        elapsed = time.perf_counter() - start
        status = _STATUS_MAP.get(problem.problem.status, SolveStatus.FAILED)
        value = problem.problem.value if status.usable else None
        if value is None or not np.isfinite(value):
            if status.usable:
                status = SolveStatus.FAILED
            value = float("nan")
        if status is SolveStatus.INACCURATE:
            logger.warning(
                f"Solver {self.options.solver} returned an inaccurate solution "
                f"(k={problem.k}, value {value:.3e})"
            )
        return SolveResult(status, float(value), elapsed, str(problem.problem.status))
