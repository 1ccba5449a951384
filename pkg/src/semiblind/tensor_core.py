"""Dense complex linear-algebra primitives.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype ``complex128`` and
third-order tensors are 3-D arrays whose frontal slice ``k`` is ``t[:, :, k]``.
``vec`` stacks columns (Fortran order), which is the convention under which

    vec(A B C) = (C^T kron A) vec(B)

holds as written.
"""

import numpy as np

from .errors import DimensionError

DEFAULT_PINV_RTOL = 1e-12


def as_cmatrix(a, name="a"):
    """Return ``a`` as a finite 2-D complex128 array."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def kron(a, b):
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    return np.kron(as_cmatrix(a, "a"), as_cmatrix(b, "b"))


def khatri_rao(a, b):
    """Column-wise Kronecker product.

    Parameters
    ----------
    a : (I, R) array_like
    b : (J, R) array_like

    Returns
    -------
    (I*J, R) ndarray
        Column ``r`` equals ``kron(a[:, r], b[:, r])``.
    """
    a = as_cmatrix(a, "a")
    b = as_cmatrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"khatri_rao needs equal column counts, got {a.shape[1]} and {b.shape[1]}"
        )
    # row index i*J + j -> a[i] * b[j]
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def vec(a):
    """Column-major vectorization, returned as a ``(rows*cols, 1)`` column."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise DimensionError(f"vec expects a matrix, got shape {a.shape}")
    return a.reshape(-1, 1, order="F").astype(np.complex128, copy=False)


def unvec(v, rows, cols):
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim == 2 and v.shape[1] != 1:
        raise DimensionError(f"unvec expects a column vector, got shape {v.shape}")
    if v.size != rows * cols:
        raise DimensionError(f"cannot unvec length {v.size} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def diag_from_row(c, i):
    """Diagonal matrix holding row ``i`` of ``c`` (the ``D_i(C)`` operator)."""
    c = np.asarray(c)
    if c.ndim != 2:
        raise DimensionError(f"diag_from_row expects a matrix, got shape {c.shape}")
    if not 0 <= i < c.shape[0]:
        raise IndexError(f"row {i} out of range for {c.shape[0]} rows")
    return np.diag(c[i].astype(np.complex128))


def _svd_parts(a, rel_tol):
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"pinv expects a matrix, got shape {a.shape}")
    if a.size == 0:
        return None
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0], s[:0], vh[:0]
    rank = int(np.count_nonzero(s > rel_tol * s[0]))
    return u[:, :rank], s[:rank], vh[:rank]


def pinv(a, rel_tol=DEFAULT_PINV_RTOL):
    """Moore-Penrose pseudo-inverse by SVD with relative truncation.

    Singular values at or below ``rel_tol * s_max`` are treated as zero.

    Returns
    -------
    a_pinv : ndarray
        Pseudo-inverse, shape ``(cols, rows)``.
    rank : int
        Number of singular values kept.
    """
    a = np.asarray(a, dtype=np.complex128)
    parts = _svd_parts(a, rel_tol)
    if parts is None:
        return np.zeros(a.shape[::-1], dtype=np.complex128), 0
    u, s, vh = parts
    return (vh.conj().T / s) @ u.conj().T, s.size


def lstsq(a, b, rel_tol=DEFAULT_PINV_RTOL):
    """Minimum-norm least-squares solution ``pinv(a) @ b`` without forming pinv.

    Returns the solution and the effective rank of ``a``.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"lstsq rows differ: {a.shape} vs {b.shape}")
    parts = _svd_parts(a, rel_tol)
    if parts is None:
        return np.zeros((a.shape[1],) + b.shape[1:], dtype=np.complex128), 0
    u, s, vh = parts
    coef = u.conj().T @ b
    coef = coef / (s[:, None] if coef.ndim == 2 else s)
    return vh.conj().T @ coef, s.size


def fro_norm(a):
    """Frobenius norm of a matrix or tensor (any ndim)."""
    a = np.asarray(a)
    return float(np.sqrt(np.sum(np.abs(a) ** 2)))
