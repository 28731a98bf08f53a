"""Vector kernels: normalization and cosine similarity.

Embeddings are stored unnormalized and normalized on read. Everything is
float64.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError

# norms below this are treated as zero
_TINY = 1e-300


def as_matrix(x) -> np.ndarray:
    """Coerce ``x`` to a 2-D float64 array (a single vector becomes one row)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DegenerateInputError(f"expected 1-D or 2-D input, got shape {arr.shape}")
    return arr


def _check_finite(arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise DegenerateInputError("non-finite embedding coordinates")


def l2_normalize(u) -> np.ndarray:
    """Return ``u`` scaled to unit norm. Works row-wise on 2-D input."""
    arr = np.asarray(u, dtype=np.float64)
    _check_finite(arr)
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    if np.any(norms <= _TINY):
        raise DegenerateInputError("cannot normalize a zero-norm vector")
    return arr / norms


def cosine_sim(u, v) -> float:
    """Cosine similarity of two vectors, ``u.v / (|u| |v|)``."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DegenerateInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    _check_finite(a)
    _check_finite(b)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na <= _TINY or nb <= _TINY:
        raise DegenerateInputError("cosine similarity of a zero-norm vector")
    s = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, s))


def cosine_matrix(a, b) -> np.ndarray:
    """All pairwise cosine similarities between the rows of ``a`` and ``b``."""
    return l2_normalize(as_matrix(a)) @ l2_normalize(as_matrix(b)).T


def cosine_grad(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise cosine similarity and its gradients.

    Returns ``(s, ds/du, ds/dv)`` for paired rows of ``u`` and ``v``.
    """
    nu = np.linalg.norm(u, axis=1, keepdims=True)
    nv = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(nu <= _TINY) or np.any(nv <= _TINY):
        raise DegenerateInputError("cosine gradient at a zero-norm vector")
    uh = u / nu
    vh = v / nv
    s = np.sum(uh * vh, axis=1)
    du = (vh - s[:, None] * uh) / nu
    dv = (uh - s[:, None] * vh) / nv
    return s, du, dv
