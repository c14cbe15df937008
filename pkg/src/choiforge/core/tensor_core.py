"""
Dense complex linear algebra for choiforge.
Provides the bipartite and multipartite index operations (partial traces,
partial transposes, reshuffling, slot permutations) and the spectral
routines every other module builds on.

Conventions: subsystems are indexed from 0, operators are stored as dense
complex128 arrays in the computational basis, and the maximally entangled
vector is left unnormalized.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from choiforge.exceptions import DimensionError, EigenSolverError, InputError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, "HermitianOperator"]


@dataclass(frozen=True)
class SubsystemDims:
    """Ordered local dimensions of a tensor-product space"""

    dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"Local dimensions must be positive: {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self) -> int:
        return len(self.dims)

    def check(self, size: int) -> None:
        """Raise unless the product of local dimensions equals size"""
        if self.total != size:
            raise DimensionError(
                f"Subsystem dims {list(self.dims)} (product {self.total}) "
                f"do not match operator dimension {size}"
            )


@dataclass(frozen=True)
class HermitianOperator:
    """
    Immutable Hermitian matrix.
    The input is symmetrized on construction so that entries(i, j) equals
    conj(entries(j, i)) bit for bit.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"Hermitian operator must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InputError("Operator has non-finite entries")
        h = (m + m.conj().T) / 2
        h.setflags(write=False)
        object.__setattr__(self, "matrix", h)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigvalsh(self) -> np.ndarray:
        return eigh(self.matrix)[0]

    def min_eigenvalue(self) -> float:
        return float(self.eigvalsh()[0])

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.matrix + other.matrix)

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.matrix - other.matrix)

    def __mul__(self, scalar: float) -> "HermitianOperator":
        return HermitianOperator(self.matrix * float(scalar))

    __rmul__ = __mul__


def as_array(x: ArrayLike) -> np.ndarray:
    """Return the dense array behind x"""
    if isinstance(x, HermitianOperator):
        return x.matrix
    return np.asarray(x)


def _as_dims(dims: Union[SubsystemDims, Sequence[int]]) -> SubsystemDims:
    return dims if isinstance(dims, SubsystemDims) else SubsystemDims(tuple(dims))


def _subsystem_set(indices: Iterable[int], n: int) -> Tuple[int, ...]:
    chosen = sorted(set(int(i) for i in indices))
    if any(i < 0 or i >= n for i in chosen):
        raise DimensionError(f"Subsystem indices {chosen} out of range for {n} subsystems")
    return tuple(chosen)


def kron(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """Kronecker product"""
    return np.kron(as_array(a), as_array(b))


def partial_trace(
    x: ArrayLike,
    dims: Union[SubsystemDims, Sequence[int]],
    traced_out: Iterable[int],
) -> np.ndarray:
    """
    Trace out the given subsystems of an operator on a tensor-product space.

    Args:
        x: Square operator of dimension prod(dims)
        dims: Local dimensions
        traced_out: Subsystem indices (0-based) to trace over

    Returns:
        Operator on the kept subsystems, in their original order
    """
    m = as_array(x)
    sd = _as_dims(dims)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"Partial trace needs a square operator, got {m.shape}")
    sd.check(m.shape[0])
    traced = _subsystem_set(traced_out, len(sd))

    n = len(sd)
    tensor = m.reshape(sd.dims + sd.dims)
    remaining = n
    for axis in reversed(traced):
        tensor = np.trace(tensor, axis1=axis, axis2=axis + remaining)
        remaining -= 1
    kept = int(np.prod([d for i, d in enumerate(sd.dims) if i not in traced]))
    return tensor.reshape(kept, kept)


def partial_transpose(
    x: ArrayLike,
    dims: Union[SubsystemDims, Sequence[int]],
    transposed: Iterable[int],
) -> np.ndarray:
    """
    Transpose the given subsystems in the computational basis.
    Works for any dtype, so it can also permute index arrays.
    """
    m = as_array(x)
    sd = _as_dims(dims)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"Partial transpose needs a square operator, got {m.shape}")
    sd.check(m.shape[0])
    chosen = _subsystem_set(transposed, len(sd))

    n = len(sd)
    axes = list(range(2 * n))
    for i in chosen:
        axes[i], axes[i + n] = axes[i + n], axes[i]
    return m.reshape(sd.dims + sd.dims).transpose(axes).reshape(m.shape)


def partial_transpose_permutation(
    dims: Union[SubsystemDims, Sequence[int]], transposed: Iterable[int]
) -> np.ndarray:
    """
    Column-major flat-index permutation realizing a partial transpose:
    vec_F(X^T_S)[p] = vec_F(X)[perm[p]].
    """
    sd = _as_dims(dims)
    n = sd.total
    idx = np.arange(n * n).reshape((n, n), order="F")
    return partial_transpose(idx, sd, transposed).flatten(order="F")


def eigh(h: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending"""
    m = as_array(h)
    try:
        values, vectors = scipy.linalg.eigh(m)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"Hermitian eigensolver failed: {str(e)}")
    return values, vectors


def eig_general(m: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Eigenvalues with right and left eigenvectors of a general square matrix.

    Returns eigenvalues sorted by (real part, imaginary part) and the matching
    columns of the right vectors V (M v = lam v) and left vectors U
    (u^H M = lam u^H). Left and right vectors come paired from the same
    Schur reduction, so column i of both belongs to eigenvalue i.
    """
    a = as_array(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"Eigen-decomposition needs a square matrix, got {a.shape}")
    try:
        values, left, right = scipy.linalg.eig(a, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"General eigensolver failed: {str(e)}")
    if not np.all(np.isfinite(values)):
        raise EigenSolverError("General eigensolver returned non-finite eigenvalues")
    order = np.lexsort((values.imag, values.real))
    return values[order], right[:, order], left[:, order]


def reshuffle(c: ArrayLike, d: int, d_out: int) -> np.ndarray:
    """
    Transfer matrix of a map from its Choi matrix.
    M[(a, b), (i, j)] = C[(i, a), (j, b)], shape (d_out^2, d^2).
    """
    m = as_array(c)
    if m.shape != (d * d_out, d * d_out):
        raise DimensionError(
            f"Choi matrix of shape {m.shape} does not match d={d}, d_out={d_out}"
        )
    return m.reshape(d, d_out, d, d_out).transpose(1, 3, 0, 2).reshape(d_out**2, d**2)


def unreshuffle(m: ArrayLike, d: int, d_out: int) -> np.ndarray:
    """Inverse of reshuffle"""
    a = as_array(m)
    if a.shape != (d_out**2, d**2):
        raise DimensionError(
            f"Transfer matrix of shape {a.shape} does not match d={d}, d_out={d_out}"
        )
    return a.reshape(d_out, d_out, d, d).transpose(2, 0, 3, 1).reshape(d * d_out, d * d_out)


def reshuffle_adjoint(k: ArrayLike, d: int, d_out: int) -> np.ndarray:
    """
    Pull a transfer-space gradient back to Choi indices.
    K (d^2 x d_out^2) with df = Re Tr(K dM) gives G with df = Re Tr(G dC).
    """
    a = as_array(k)
    if a.shape != (d**2, d_out**2):
        raise DimensionError(
            f"Transfer gradient of shape {a.shape} does not match d={d}, d_out={d_out}"
        )
    return a.reshape(d, d, d_out, d_out).transpose(1, 3, 0, 2).reshape(d * d_out, d * d_out)


def reshuffle_gradient(g: ArrayLike, d: int, d_out: int) -> np.ndarray:
    """Inverse of reshuffle_adjoint: Choi-space gradient to transfer space"""
    a = as_array(g)
    if a.shape != (d * d_out, d * d_out):
        raise DimensionError(
            f"Choi gradient of shape {a.shape} does not match d={d}, d_out={d_out}"
        )
    return a.reshape(d, d_out, d, d_out).transpose(2, 0, 3, 1).reshape(d**2, d_out**2)


def herm_to_real_embed(h: ArrayLike) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]]"""
    m = as_array(h)
    re, im = m.real, m.imag
    return np.block([[re, -im], [im, re]])


def permutation_operator(
    perm: Sequence[int], dims: Union[SubsystemDims, Sequence[int]]
) -> np.ndarray:
    """
    Unitary permuting the B slots of A (x) B_1 (x) ... (x) B_k.

    Args:
        perm: perm[i] is the image of slot i under the permutation (0-based)
        dims: [d_A, d_B, ..., d_B]

    Returns:
        0/1 matrix P with P|a, b_1..b_k> = |a, b_{pi^-1(1)}..b_{pi^-1(k)}>
    """
    sd = _as_dims(dims)
    k = len(sd) - 1
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(k)):
        raise InputError(f"{perm} is not a permutation of {k} B slots")
    b_dims = set(sd.dims[1:])
    if len(b_dims) > 1:
        raise DimensionError(f"B slots must share one dimension, got {list(sd.dims[1:])}")

    n = sd.total
    inverse = np.argsort(perm)
    coords = np.unravel_index(np.arange(n), sd.dims)
    out = [coords[0]] + [coords[1 + inverse[j]] for j in range(k)]
    target = np.ravel_multi_index(out, sd.dims)
    p = np.zeros((n, n))
    p[target, np.arange(n)] = 1.0
    return p


def matrix_exp(a: ArrayLike) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)"""
    return scipy.linalg.expm(as_array(a))


def matrix_exp_derivative(a: ArrayLike, e: ArrayLike) -> np.ndarray:
    """
    Directional derivative of exp at a along e, read from the upper-right
    block of exp([[a, e], [0, a]]).
    """
    m, dm = as_array(a), as_array(e)
    n = m.shape[0]
    block = np.zeros((2 * n, 2 * n), dtype=np.result_type(m, dm, np.float64))
    block[:n, :n] = m
    block[n:, n:] = m
    block[:n, n:] = dm
    return scipy.linalg.expm(block)[:n, n:]


def max_ent_vector(d: int) -> np.ndarray:
    """Unnormalized maximally entangled vector sum_i |i>|i>"""
    if d < 1:
        raise InputError(f"Dimension must be positive, got {d}")
    psi = np.zeros(d * d, dtype=np.complex128)
    psi[:: d + 1] = 1.0
    return psi


def random_hermitian(
    dim: int, rng: np.random.Generator, scale: float = 1.0
) -> np.ndarray:
    """Gaussian Hermitian matrix"""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (z + z.conj().T) / 2


def random_density(
    dim: int, rng: np.random.Generator, rank: Optional[int] = None
) -> np.ndarray:
    """Random unit-trace PSD matrix"""
    r = rank or dim
    g = rng.normal(size=(dim, r)) + 1j * rng.normal(size=(dim, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unit_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector"""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)
