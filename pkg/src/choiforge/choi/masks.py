"""
Masks over Choi-matrix entries.
A mask is a boolean (d*d') x (d*d') matrix; True marks an entry the optimizer
may move, False forces the entry to zero. Masks must be symmetric so that
masking commutes with Hermitian conjugation.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from choiforge.exceptions import DimensionError, InputError, MaskValidationError

logger = logging.getLogger(__name__)

FAMILY9_ENTRIES = [(0, 0), (1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, 6), (7, 7), (8, 8),
                   (1, 3), (3, 1), (0, 8), (8, 0)]


def _index_pair(flat: int, d_out: int) -> Tuple[int, int]:
    return divmod(int(flat), d_out)


def asymmetric_pairs(
    mask: np.ndarray, d_out: int
) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """Entries (i, j, k, l) whose partner (k, l, i, j) carries a different value"""
    rows, cols = np.nonzero(mask != mask.T)
    pairs = []
    for r, c in zip(rows, cols):
        if r < c:
            pairs.append((_index_pair(r, d_out) + _index_pair(c, d_out),
                          _index_pair(c, d_out) + _index_pair(r, d_out)))
    return pairs


def validate_mask(mask: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    """Check shape and symmetry, returning the mask as a read-only bool array"""
    m = np.asarray(mask)
    n = d_in * d_out
    if m.shape != (n, n):
        raise DimensionError(f"Mask of shape {m.shape} does not match d={d_in}, d_out={d_out}")
    if not np.all((m == 0) | (m == 1)):
        raise InputError("Mask entries must be 0 or 1")
    m = m.astype(bool)
    pairs = asymmetric_pairs(m, d_out)
    if pairs:
        raise MaskValidationError(pairs)
    m.setflags(write=False)
    return m


def full_mask(d_in: int, d_out: int) -> np.ndarray:
    n = d_in * d_out
    return np.ones((n, n), dtype=bool)


def family9_mask() -> np.ndarray:
    """Zero pattern of the masked 3x3 family"""
    mask = np.zeros((9, 9), dtype=bool)
    rows, cols = zip(*FAMILY9_ENTRIES)
    mask[list(rows), list(cols)] = True
    return mask


def random_mask(
    d_in: int, d_out: int, density: float, rng: np.random.Generator
) -> np.ndarray:
    """
    Random symmetric mask keeping each off-diagonal pair with probability density.
    Diagonal entries are always kept.
    """
    if not 0.0 <= density <= 1.0:
        raise InputError(f"Mask density must lie in [0, 1], got {density}")
    n = d_in * d_out
    upper = np.triu(rng.random((n, n)) < density, k=1)
    return upper | upper.T | np.eye(n, dtype=bool)


def builtin_mask(
    name: str, d_in: int, d_out: int, seed: Optional[int] = None
) -> np.ndarray:
    """
    Resolve a named mask.

    Args:
        name: "family9", "full" or "random:<density>"
        d_in: Input dimension
        d_out: Output dimension
        seed: Seed for random masks

    Returns:
        Validated boolean mask
    """
    if name == "family9":
        if (d_in, d_out) != (3, 3):
            raise DimensionError("The family9 mask is defined for d = d_out = 3 only")
        mask = family9_mask()
    elif name == "full":
        mask = full_mask(d_in, d_out)
    elif name.startswith("random:"):
        try:
            density = float(name.split(":", 1)[1])
        except ValueError:
            raise InputError(f"Invalid random mask density in {name!r}")
        mask = random_mask(d_in, d_out, density, np.random.default_rng(seed))
    else:
        raise InputError(f"Unknown builtin mask {name!r}")
    return validate_mask(mask, d_in, d_out)


def resolve_mask(
    spec: Optional[Union[str, Path]], d_in: int, d_out: int, seed: Optional[int] = None
) -> Optional[np.ndarray]:
    """Builtin name or path to a mask file; None means unmasked"""
    if spec is None:
        return None
    text = str(spec)
    if text in ("family9", "full") or text.startswith("random:"):
        return builtin_mask(text, d_in, d_out, seed)
    from choiforge.choi.io import load_mask

    mask = load_mask(text)
    if mask.shape != (d_in * d_out, d_in * d_out):
        raise DimensionError(
            f"Mask file {text} has shape {mask.shape}, expected {(d_in * d_out,) * 2}"
        )
    return mask
