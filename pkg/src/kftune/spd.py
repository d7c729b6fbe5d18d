"""Unconstrained parameterization of SPD matrices via Cholesky factors.

An SPD matrix A is encoded as A = L Lᵀ with L lower-triangular; the
n(n+1)/2 free parameters are the strict lower triangle of L (row-major)
followed by the logs of its diagonal. Any real parameter vector therefore
decodes to a valid SPD matrix, which is what lets a plain gradient method
tune covariance matrices without constraint handling.
"""

from __future__ import annotations

import numpy as np

from .errors import DefinitenessError, ShapeError

__all__ = [
    "theta_size",
    "matrix_dim",
    "strict_lower_index",
    "theta_layout",
    "theta_to_lower",
    "lower_to_spd",
    "theta_to_spd",
    "spd_to_theta",
    "spd_var",
]


def theta_size(n: int) -> int:
    """Number of parameters encoding an n x n SPD matrix."""
    return n * (n + 1) // 2


def matrix_dim(theta: np.ndarray) -> int:
    """Matrix dimension n implied by a parameter vector length."""
    m = len(theta)
    n = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if theta_size(n) != m:
        raise ShapeError(f"parameter vector of length {m} is not triangular")
    return n


def strict_lower_index(n: int, i: int, j: int) -> int:
    """Parameter index of the strict-lower entry L[i, j] (0-based, i > j).

    This is the single place where the 1-based layout
    ``theta_{(i-2)(i-1)/2 + j}`` is translated to 0-based indexing; every
    encoder/decoder goes through :func:`theta_layout`, which is built on it.
    """
    if not (0 <= j < i < n):
        raise ShapeError(f"({i},{j}) is not strictly lower for n={n}")
    return (i - 1) * i // 2 + j


def theta_layout(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index arrays mapping a parameter vector into an n x n lower factor.

    Returns (rows, cols, theta_idx): entry k of the parameter vector lands
    at L[rows[k], cols[k]]; positions with theta_idx >= n(n-1)/2 are
    diagonal and carry log-values.
    """
    rows, cols, idx = [], [], []
    for i in range(n):
        for j in range(i):
            rows.append(i)
            cols.append(j)
            idx.append(strict_lower_index(n, i, j))
    off = n * (n - 1) // 2
    for i in range(n):
        rows.append(i)
        cols.append(i)
        idx.append(off + i)
    order = np.argsort(idx)
    return (np.array(rows)[order], np.array(cols)[order], np.array(idx)[order])


def theta_to_lower(theta: np.ndarray) -> np.ndarray:
    """Decode a parameter vector into the lower-triangular factor L.

    Strict-lower entries are copied verbatim (row-major order), diagonal
    entries are exponentiated, so the diagonal is positive for any input.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise ShapeError("theta must be a 1-D vector")
    if not np.all(np.isfinite(theta)):
        raise ShapeError("theta entries must be finite")
    n = matrix_dim(theta)
    L = np.zeros((n, n))
    rows, cols, idx = theta_layout(n)
    vals = theta[idx].copy()
    diag = rows == cols
    vals[diag] = np.exp(vals[diag])
    L[rows, cols] = vals
    return L


def lower_to_spd(L: np.ndarray) -> np.ndarray:
    """A = L Lᵀ. SPD whenever L is lower-triangular with positive diagonal."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ShapeError("L must be square")
    return L @ L.T


def theta_to_spd(theta: np.ndarray) -> np.ndarray:
    """Full decode: parameter vector -> SPD matrix."""
    return lower_to_spd(theta_to_lower(theta))


def spd_to_theta(A: np.ndarray) -> np.ndarray:
    """Encode an SPD matrix as a parameter vector (inverse of theta_to_spd).

    Uses the unique Cholesky factor with positive diagonal; raises
    DefinitenessError when A is not SPD.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError("A must be square")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"matrix is not positive definite: {exc}") from exc
    n = A.shape[0]
    theta = np.empty(theta_size(n))
    rows, cols, idx = theta_layout(n)
    vals = L[rows, cols].copy()
    diag = rows == cols
    vals[diag] = np.log(vals[diag])
    theta[idx] = vals
    return theta


def spd_var(tape, theta_var, n: int):
    """Differentiable decode of a tape variable holding theta into an SPD Var.

    theta_var is an (m x 1) column on `tape` with m = n(n+1)/2. Returns the
    (n x n) SPD variable A = L(theta) L(theta)ᵀ.
    """
    from . import autodiff as ad

    m = theta_size(n)
    if theta_var.shape != (m, 1):
        raise ShapeError(f"theta var shape {theta_var.shape} != ({m}, 1)")
    rows, cols, idx = theta_layout(n)
    diag = rows == cols
    off = ~diag
    L = ad.scatter(
        ad.exp_elem(ad.gather(theta_var, idx[diag])), rows[diag], cols[diag], (n, n)
    )
    if off.any():
        lower_off = ad.scatter(
            ad.gather(theta_var, idx[off]), rows[off], cols[off], (n, n)
        )
        L = ad.add(L, lower_off)
    return ad.matmul(L, ad.transpose(L))
