"""Comparison methods: fixed 10-term candidate library with Lasso, STRidge
and AIC/BIC scoring, plus noise statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GridField
from .numerics import svd_lstsq
from .training import FieldJet

THETA_TERMS: tuple[tuple[int, ...], ...] = (
    (0,), (1,), (2,), (3,),
    (0, 1), (0, 2), (0, 3),
    (0, 0, 1), (0, 0, 2), (0, 0, 3),
)
THETA_NAMES = ("u", "u_x", "u_xx", "u_xxx", "u*u_x", "u*u_xx", "u*u_xxx",
               "u^2*u_x", "u^2*u_xx", "u^2*u_xxx")


@dataclass(frozen=True)
class ThetaLibrary:
    """The fixed 10-column candidate matrix evaluated on a meta grid."""

    columns: np.ndarray  # (n_points, 10)

    def __post_init__(self):
        if self.columns.ndim != 2 or self.columns.shape[1] != len(THETA_TERMS):
            raise ValueError(f"theta must have {len(THETA_TERMS)} columns")
        if not np.all(np.isfinite(self.columns)):
            raise ValueError("theta contains non-finite values")

    @property
    def names(self) -> tuple[str, ...]:
        return THETA_NAMES


def build_theta(jet: FieldJet) -> ThetaLibrary:
    """Assemble the columns pointwise from the jet (no differencing needed)."""
    u, ux, uxx, uxxx = jet.u, jet.u_x, jet.u_xx, jet.u_xxx
    u2 = u * u
    cols = np.column_stack([
        u, ux, uxx, uxxx,
        u * ux, u * uxx, u * uxxx,
        u2 * ux, u2 * uxx, u2 * uxxx,
    ])
    return ThetaLibrary(cols)


@dataclass
class LassoResult:
    coefficients: np.ndarray
    intercept: float
    alpha: float
    n_sweeps: int
    converged: bool
    gap: float

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.nonzero(self.coefficients)[0])


def lasso(theta: ThetaLibrary | np.ndarray, target: np.ndarray, alpha: float,
          tol: float = 1e-8, max_sweeps: int = 100000) -> LassoResult:
    """Coordinate-descent minimizer of 0.5*||y - X b||^2 / n + alpha*||b||_1.

    Columns are standardized internally (zero mean, unit variance) and the
    target centered; returned coefficients are de-standardized, with the
    implied intercept reported separately. Convergence: the largest
    coefficient change in a sweep falls below ``tol``.
    """
    x = theta.columns if isinstance(theta, ThetaLibrary) else np.asarray(theta, float)
    y = np.asarray(target, float)
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    n, k = x.shape
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=0)
    if np.any(std == 0):
        raise ValueError("constant column in the candidate library")
    xs = (x - mean) / std
    y_mean = float(y.mean())
    yc = y - y_mean

    beta = np.zeros(k)
    resid = yc.copy()
    col_norm = np.full(k, float(n))  # standardized columns have ||col||^2 = n
    thresh = alpha * n
    sweeps = 0
    gap = np.inf
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(k):
            b_old = beta[j]
            rho = float(xs[:, j] @ resid) + b_old * col_norm[j]
            b_new = np.sign(rho) * max(abs(rho) - thresh, 0.0) / col_norm[j]
            if b_new != b_old:
                resid += xs[:, j] * (b_old - b_new)
                beta[j] = b_new
                max_delta = max(max_delta, abs(b_new - b_old))
        gap = max_delta
        if max_delta < tol:
            break
    converged = bool(gap < tol)
    coef = beta / std
    intercept = y_mean - float(coef @ mean)
    return LassoResult(coef, intercept, alpha, sweeps, converged, gap)


def lasso_alpha_max(theta: ThetaLibrary | np.ndarray, target: np.ndarray) -> float:
    """Smallest alpha that forces the all-zero solution (standardized)."""
    x = theta.columns if isinstance(theta, ThetaLibrary) else np.asarray(theta, float)
    y = np.asarray(target, float)
    xs = (x - x.mean(axis=0)) / x.std(axis=0, ddof=0)
    yc = y - y.mean()
    return float(np.max(np.abs(xs.T @ yc)) / x.shape[0])


@dataclass
class StridgeResult:
    coefficients: np.ndarray
    l0_penalty: float
    threshold: float

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.nonzero(self.coefficients)[0])


def _stridge_iterate(x, y, ridge_lambda, threshold, max_iter=10):
    """Ridge fits with hard thresholding until the support stabilizes."""
    n, k = x.shape
    if ridge_lambda > 0:
        w = np.linalg.solve(x.T @ x + ridge_lambda * np.eye(k), x.T @ y)
    else:
        w = svd_lstsq(x, y)
    big = np.abs(w) >= threshold
    for _ in range(max_iter):
        w = np.where(big, w, 0.0)
        if not big.any():
            return w
        sub = x[:, big]
        if ridge_lambda > 0:
            w_sub = np.linalg.solve(sub.T @ sub + ridge_lambda * np.eye(sub.shape[1]),
                                    sub.T @ y)
        else:
            w_sub = svd_lstsq(sub, y)
        w[big] = w_sub
        new_big = np.abs(w) >= threshold
        if np.array_equal(new_big, big):
            break
        big = new_big
    w[~big] = 0.0
    if big.any():
        w[big] = svd_lstsq(x[:, big], y)
    return w


def stridge(theta: ThetaLibrary | np.ndarray, target: np.ndarray,
            ridge_lambda: float = 1e-5,
            l0_penalties: tuple[float, ...] = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0),
            n_thresholds: int = 30, seed: int = 0) -> list[StridgeResult]:
    """Sequentially thresholded ridge regression over an l0-penalty sweep.

    Columns are scaled to unit 2-norm internally. For each sweep value eta
    the hard threshold is tuned on a held-out split by the score
    ``||y_v - X_v w||_2 + eta * cond(X) * ||w||_0`` (the published
    procedure's validation criterion, with the condition number of the raw
    candidate matrix setting the penalty scale). The winning threshold's
    de-scaled coefficients are returned per sweep point.
    """
    x = theta.columns if isinstance(theta, ThetaLibrary) else np.asarray(theta, float)
    y = np.asarray(target, float)
    if ridge_lambda < 0:
        raise ValueError("ridge penalty must be >= 0")
    n, k = x.shape
    norms = np.linalg.norm(x, axis=0)
    if np.any(norms == 0):
        raise ValueError("zero column in the candidate library")
    xn = x / norms

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = max(k, int(round(0.8 * n)))
    tr, va = perm[:n_train], perm[n_train:]
    if va.size == 0:
        tr = va = perm
    cond = float(np.linalg.cond(x))

    w_ls = svd_lstsq(xn[tr], y[tr])
    t_max = float(np.max(np.abs(w_ls))) if np.any(w_ls) else 1.0
    thresholds = np.concatenate(
        [[0.0], np.geomspace(t_max * 1e-4, t_max * 1.0001, n_thresholds)]
    )

    results = []
    for penalty in l0_penalties:
        best = None
        for thr in thresholds:
            w = _stridge_iterate(xn[tr], y[tr], ridge_lambda, thr)
            resid = y[va] - xn[va] @ w
            score = float(np.linalg.norm(resid)) \
                + penalty * cond * int(np.count_nonzero(w))
            if best is None or score < best[0] - 1e-15:
                best = (score, thr, w)
        _, thr, w = best
        results.append(StridgeResult(w / norms, float(penalty), float(thr)))
    return results


def ic_score(term_columns: np.ndarray, target: np.ndarray, kind: str) -> float:
    """AIC or BIC of the least-squares fit (Gaussian likelihood form).

    AIC = N ln(MSE) + 2k, BIC = N ln(MSE) + k ln(N); lower is better.
    A perfect fit scores -inf (documented sentinel)."""
    if kind not in ("AIC", "BIC"):
        raise ValueError(f"unknown criterion {kind!r}")
    x = np.asarray(term_columns, float)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("combination must be non-empty")
    n, k = x.shape
    w = svd_lstsq(x, target)
    resid = target - x @ w
    mse = float(np.mean(resid * resid))
    if mse == 0.0:
        return float("-inf")
    penalty = 2.0 * k if kind == "AIC" else k * np.log(n)
    return float(n * np.log(mse) + penalty)


def noise_metrics(clean: GridField, noisy: GridField) -> tuple[float, float, float]:
    """(MSE, MAE, relative noise error in percent) between two grids."""
    if clean.shape != noisy.shape or not np.array_equal(clean.xs, noisy.xs) \
            or not np.array_equal(clean.ts, noisy.ts):
        raise ValueError("grids do not match")
    diff = clean.values - noisy.values
    mse = float(np.mean(diff * diff))
    mae = float(np.mean(np.abs(diff)))
    e_noise = float(np.sqrt(np.sum(diff * diff) / np.sum(clean.values ** 2)) * 100.0)
    return mse, mae, e_noise
