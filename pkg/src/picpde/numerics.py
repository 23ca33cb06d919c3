"""Shared numerical kernels: SVD least squares and finite-difference operators."""

from __future__ import annotations

import numpy as np

# Relative singular-value cutoff used by every least-squares solve in the package.
SVD_RCOND = 1e-10


def svd_lstsq(a: np.ndarray, y: np.ndarray, rcond: float = SVD_RCOND) -> np.ndarray:
    """Minimum-norm least-squares solution of ``a @ x = y`` via SVD.

    Singular values below ``rcond * sigma_max`` are truncated.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    if a.ndim != 2:
        raise ValueError("design matrix must be 2-D")
    if a.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: {a.shape} vs {y.shape}")
    x, _, _, _ = np.linalg.lstsq(a, y, rcond=rcond)
    return x


def diff_matrix(n: int, dx: float) -> np.ndarray:
    """Dense first-derivative matrix: second-order central, one-sided at the edges."""
    if n < 3:
        raise ValueError("need at least 3 points for second-order differencing")
    d = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    d[idx, idx - 1] = -0.5
    d[idx, idx + 1] = 0.5
    d[0, 0], d[0, 1], d[0, 2] = -1.5, 2.0, -0.5
    d[n - 1, n - 1], d[n - 1, n - 2], d[n - 1, n - 3] = 1.5, -2.0, 0.5
    d /= dx
    return d


def central_diff(values: np.ndarray, dx: float, axis: int = 0) -> np.ndarray:
    """Second-order first derivative along ``axis`` (one-sided at both ends)."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if v.shape[0] < 3:
        raise ValueError("need at least 3 points along the differencing axis")
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * dx)
    out[0] = (-1.5 * v[0] + 2.0 * v[1] - 0.5 * v[2]) / dx
    out[-1] = (1.5 * v[-1] - 2.0 * v[-2] + 0.5 * v[-3]) / dx
    return np.moveaxis(out, 0, axis)


def trapezoid_cumulative(values: np.ndarray, dx: float, axis: int = 0) -> np.ndarray:
    """Cumulative trapezoid integral along ``axis``, zero at the first node."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    out = np.zeros_like(v)
    np.cumsum(0.5 * dx * (v[1:] + v[:-1]), axis=0, out=out[1:])
    return np.moveaxis(out, 0, axis)


def population_std(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Standard deviation with the n-denominator convention."""
    return np.asarray(values, dtype=float).std(axis=axis, ddof=0)
