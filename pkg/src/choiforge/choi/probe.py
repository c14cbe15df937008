"""
See-saw probe of block positivity.
Minimizes <v (x) w| C |v (x) w> over unit product vectors by alternating
minimal-eigenvector updates from many random starts. The result is an upper
bound on the true minimum.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from choiforge.choi.choi_matrix import ChoiMatrix
from choiforge.exceptions import InputError

logger = logging.getLogger(__name__)


def _min_eigvecs(blocks: np.ndarray) -> np.ndarray:
    """Minimal eigenvectors of a stack of Hermitian matrices"""
    _, vectors = np.linalg.eigh(blocks)
    return vectors[..., :, 0]


def _random_unit(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    v = rng.normal(size=(count, dim)) + 1j * rng.normal(size=(count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def block_positivity_probe(
    choi: ChoiMatrix,
    n_samples: int = 10_000,
    seesaw_iters: int = 20,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, np.ndarray]:
    """
    Heuristic minimum of the Choi form over product vectors.

    Args:
        choi: Choi matrix to probe
        n_samples: Number of random starting points
        seesaw_iters: Alternating refinements per start
        rng: Random generator (seed 0 when omitted)

    Returns:
        (minimal value found, product vector v (x) w attaining it)
    """
    if n_samples < 1:
        raise InputError(f"Probe needs at least one sample, got {n_samples}")
    rng = rng or np.random.default_rng(0)
    d, d_out = choi.d_in, choi.d_out
    c4 = choi.array.reshape(d, d_out, d, d_out)

    v = _random_unit(rng, n_samples, d)
    w = _random_unit(rng, n_samples, d_out)
    for _ in range(seesaw_iters):
        w_blocks = np.einsum("si,iakb,sk->sab", v.conj(), c4, v)
        w = _min_eigvecs(w_blocks)
        v_blocks = np.einsum("sa,iakb,sb->sik", w.conj(), c4, w)
        v = _min_eigvecs(v_blocks)

    values = np.einsum(
        "si,sa,iakb,sk,sb->s", v.conj(), w.conj(), c4, v, w, optimize=True
    ).real
    best = int(np.argmin(values))
    vector = np.kron(v[best], w[best])
    logger.debug(f"Block-positivity probe: min {values[best]:.3e} over {n_samples} starts")
    return float(values[best]), vector
