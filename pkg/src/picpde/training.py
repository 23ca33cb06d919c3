"""Adam training of the surrogate and its PDE-constrained variant.

The surrogate minimizes the data misfit with full-batch Adam and
validation-based early stopping. The constrained variant adds a PDE
residual evaluated on the meta grid, whose coefficients are re-solved by
least squares every epoch and held fixed during the gradient step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff
from .autodiff import (FACTORIAL, JetWorkspace, PlainWorkspace, QDenominatorError,
                       SEED_T, SEED_X, alloc_grads, jet_backward, jet_forward,
                       plain_backward, plain_forward, zero_grads)
from .grids import SampleSet
from .network import Mlp
from .numerics import diff_matrix, svd_lstsq
from .terms import lhs_column, monomial_column

TRAIN_Q_GUARD = 1e-6


class TrainingDivergence(RuntimeError):
    """Loss became non-finite (or the rational denominator degenerated)."""

    def __init__(self, epoch: int, detail: str):
        super().__init__(f"training diverged at epoch {epoch}: {detail}")
        self.epoch = epoch


class ConstraintError(ValueError):
    """The PDE constraint produced a degenerate (all-zero) term column."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 30000
    patience: int = 12
    check_interval: int = 100
    val_fraction: float = 0.1
    min_rel_improvement: float = 1e-4
    lambda_data: float = 1.0
    lambda_pde: float = 0.01
    seed: int = 0
    compute_dtype: str = "float32"

    def __post_init__(self):
        if self.learning_rate <= 0 or self.lambda_data <= 0 or self.lambda_pde < 0:
            raise ValueError("rates and loss weights must be positive")
        if not 0 < self.val_fraction <= 0.5:
            raise ValueError("val_fraction must lie in (0, 0.5]")
        if self.max_epochs < 0 or self.patience < 1 or self.check_interval < 1:
            raise ValueError("epoch/patience/interval settings out of range")
        if self.compute_dtype not in ("float32", "float64"):
            raise ValueError("compute_dtype must be float32|float64")

    @property
    def dtype(self):
        return np.float32 if self.compute_dtype == "float32" else np.float64


@dataclass(frozen=True)
class MetaGrid:
    """Uniform interior evaluation grid for the trained surrogate."""

    x_bounds: tuple[float, float]
    t_bounds: tuple[float, float]
    n_x: int = 100
    n_t: int = 100

    def __post_init__(self):
        if self.n_x < 10 or self.n_t < 10:
            raise ValueError("meta-grid resolution must be >= 10 per axis")
        if not (self.x_bounds[0] < self.x_bounds[1] and self.t_bounds[0] < self.t_bounds[1]):
            raise ValueError("meta-grid bounds must be ordered")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_bounds[0], self.x_bounds[1], self.n_x)

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(self.t_bounds[0], self.t_bounds[1], self.n_t)

    @property
    def dx(self) -> float:
        return (self.x_bounds[1] - self.x_bounds[0]) / (self.n_x - 1)

    def points(self) -> np.ndarray:
        """(n_x * n_t, 2) array of (x, t) pairs in x-major order."""
        xx, tt = np.meshgrid(self.xs, self.ts, indexing="ij")
        return np.column_stack([xx.ravel(), tt.ravel()])

    def check_inside(self, x_bounds, t_bounds) -> None:
        if not (x_bounds[0] < self.x_bounds[0] and self.x_bounds[1] < x_bounds[1]
                and t_bounds[0] < self.t_bounds[0] and self.t_bounds[1] < t_bounds[1]):
            raise ValueError(
                f"meta-grid bounds {self.x_bounds}x{self.t_bounds} are not strictly "
                f"inside the observation bounding box {x_bounds}x{t_bounds}"
            )


@dataclass(frozen=True)
class FieldJet:
    """Surrogate values and derivatives on a meta grid (x-major columns)."""

    meta: MetaGrid
    u: np.ndarray
    u_x: np.ndarray
    u_xx: np.ndarray
    u_xxx: np.ndarray
    u_t: np.ndarray
    u_tt: np.ndarray

    def __post_init__(self):
        n = self.meta.n_x * self.meta.n_t
        for name in ("u", "u_x", "u_xx", "u_xxx", "u_t", "u_tt"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class PdeConstraint:
    """A candidate PDE: monomial terms (gene tuples) and an LHS choice."""

    terms: tuple[tuple[int, ...], ...]
    lhs: str

    def __post_init__(self):
        if not self.terms:
            raise ValueError("constraint needs at least one term")
        if self.lhs not in ("u_t", "u_tt"):
            raise ValueError(f"unknown LHS {self.lhs!r}")

    @property
    def max_gene(self) -> int:
        return max(g for t in self.terms for g in t)


class Adam:
    """Standard Adam with bias correction; updates parameters in place."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainReport:
    epochs_run: int
    best_epoch: int
    best_val: float
    initial_val: float
    final_train: float
    val_history: list
    final_net: Mlp


def split_samples(data: SampleSet, cfg: TrainConfig):
    """Seeded train/validation split shared by both trainers."""
    n = len(data)
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(cfg.val_fraction * n)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    pts = np.column_stack([data.xs, data.ts])
    return pts[train_idx], data.us[train_idx], pts[val_idx], data.us[val_idx]


def _val_loss(net: Mlp, pts, ys, ws) -> float:
    out = plain_forward(net, pts, ws, q_guard=TRAIN_Q_GUARD)
    return float(np.mean((out - ys) ** 2))


def train_surrogate(net: Mlp, data: SampleSet, cfg: TrainConfig):
    """Fit a copy of ``net`` to the samples; returns (best net, report).

    Full-batch Adam on the training split; stops when the validation loss
    fails to improve (relatively, by ``min_rel_improvement``) for
    ``patience`` consecutive checks, or at ``max_epochs``. The returned
    network carries the parameters of the best recorded validation loss.
    """
    if len(data) < 100:
        raise ValueError("need at least 100 samples")
    net = net.astype(cfg.dtype)
    x_tr, y_tr, x_val, y_val = split_samples(data, cfg)
    x_tr, y_tr = x_tr.astype(cfg.dtype), y_tr.astype(cfg.dtype)
    x_val, y_val = x_val.astype(cfg.dtype), y_val.astype(cfg.dtype)
    ws = PlainWorkspace(net, x_tr.shape[0])
    ws_val = PlainWorkspace(net, x_val.shape[0])
    grads = alloc_grads(net)
    adam = Adam(net.parameters(), cfg.learning_rate)

    best_val = _val_loss(net, x_val, y_val, ws_val)
    initial_val = best_val
    best_params = [p.copy() for p in net.parameters()]
    best_epoch = 0
    fails = 0
    val_history = [(0, best_val)]
    n_tr = x_tr.shape[0]
    train_loss = float("nan")
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        try:
            out = plain_forward(net, x_tr, ws, q_guard=TRAIN_Q_GUARD)
        except QDenominatorError as exc:
            raise TrainingDivergence(epoch, str(exc)) from exc
        resid = out - y_tr
        train_loss = float(np.mean(resid * resid))
        if not np.isfinite(train_loss):
            raise TrainingDivergence(epoch, f"training loss {train_loss}")
        zero_grads(grads)
        plain_backward(net, x_tr, ws, (2.0 * cfg.lambda_data / n_tr) * resid, grads)
        adam.step(grads)
        if epoch % cfg.check_interval == 0:
            val = _val_loss(net, x_val, y_val, ws_val)
            val_history.append((epoch, val))
            if val < best_val - cfg.min_rel_improvement * abs(best_val):
                best_val = val
                best_epoch = epoch
                for dst, src in zip(best_params, net.parameters()):
                    np.copyto(dst, src)
                fails = 0
            else:
                fails += 1
                if fails >= cfg.patience:
                    break
    if cfg.max_epochs == 0:
        ws0 = PlainWorkspace(net, x_tr.shape[0])
        out = plain_forward(net, x_tr, ws0, q_guard=TRAIN_Q_GUARD)
        train_loss = float(np.mean((out - y_tr) ** 2))
    report = TrainReport(
        epochs_run=epoch, best_epoch=best_epoch, best_val=best_val,
        initial_val=initial_val, final_train=train_loss,
        val_history=val_history, final_net=net.astype(np.float64),
    )
    best = net.copy()
    best.set_parameters(best_params)
    return best.astype(np.float64), report


def eval_meta(net: Mlp, meta: MetaGrid) -> FieldJet:
    """Full jet (x-order 3, t-order 2) at every meta-grid node."""
    net = net if net.dtype == np.float64 else net.astype(np.float64)
    pts = meta.points()
    n = pts.shape[0]
    ws_x = JetWorkspace(net, n, 3)
    cx = jet_forward(net, pts, SEED_X, 3, ws_x, q_guard=1e-12)
    ws_t = JetWorkspace(net, n, 2)
    ct = jet_forward(net, pts, SEED_T, 2, ws_t, q_guard=1e-12)
    return FieldJet(
        meta=meta,
        u=cx[0].copy(),
        u_x=cx[1].copy(),
        u_xx=FACTORIAL[2] * cx[2],
        u_xxx=FACTORIAL[3] * cx[3],
        u_t=ct[1].copy(),
        u_tt=FACTORIAL[2] * ct[2],
    )


@dataclass
class PinnReport:
    epochs_run: int
    xi: np.ndarray
    mse_data: float
    mse_pde: float


def _constraint_columns(constraint: PdeConstraint, cx, ct, meta: MetaGrid,
                        d_matrix):
    """Gene and term columns of the constraint from raw jet coefficients."""
    gmax = constraint.max_gene
    cols = {}
    for g in range(min(gmax, 3) + 1):
        cols[g] = FACTORIAL[g] * cx[g] if g >= 2 else cx[g]
    if gmax > 3:
        current = (FACTORIAL[3] * cx[3]).reshape(meta.n_x, meta.n_t)
        for g in range(4, gmax + 1):
            current = d_matrix @ current
            cols[g] = current.reshape(-1)
    term_cols = np.column_stack(
        [monomial_column(t, cols) for t in constraint.terms]
    )
    lhs = ct[1] if constraint.lhs == "u_t" else FACTORIAL[2] * ct[2]
    return cols, term_cols, lhs


def train_pinn(net: Mlp, data: SampleSet, constraint: PdeConstraint,
               meta: MetaGrid, epochs: int, cfg: TrainConfig):
    """Train a copy of ``net`` with the constraint as a soft PDE penalty.

    Each epoch re-solves the constraint coefficients by SVD least squares
    on the meta grid, then takes one Adam step on
    lambda_data * MSE_data + lambda_pde * MSE_pde with those coefficients
    fixed. Returns (trained net, report with the final coefficients).
    """
    original = net
    net = net.astype(cfg.dtype)
    x_tr, y_tr, _, _ = split_samples(data, cfg)
    x_tr, y_tr = x_tr.astype(cfg.dtype), y_tr.astype(cfg.dtype)
    n_tr = x_tr.shape[0]
    ws_data = PlainWorkspace(net, n_tr)
    grads = alloc_grads(net)
    adam = Adam(net.parameters(), cfg.learning_rate)

    pts = meta.points().astype(cfg.dtype)
    n_meta = pts.shape[0]
    use_pde = cfg.lambda_pde > 0.0
    x_order = max(1, min(constraint.max_gene, 3))
    t_order = 1 if constraint.lhs == "u_t" else 2
    ws_x = JetWorkspace(net, n_meta, x_order) if use_pde else None
    ws_t = JetWorkspace(net, n_meta, t_order) if use_pde else None
    d_matrix = (diff_matrix(meta.n_x, meta.dx).astype(cfg.dtype)
                if constraint.max_gene > 3 else None)
    k = len(constraint.terms)
    xi = np.zeros(k)
    mse_pde = 0.0
    mse_data = float("nan")

    def solve_xi():
        cx = jet_forward(net, pts, SEED_X, x_order, ws_x, q_guard=TRAIN_Q_GUARD)
        ct = jet_forward(net, pts, SEED_T, t_order, ws_t, q_guard=TRAIN_Q_GUARD)
        cols, term_cols, lhs = _constraint_columns(constraint, cx, ct, meta, d_matrix)
        for j, t in enumerate(constraint.terms):
            if not np.any(term_cols[:, j]):
                raise ConstraintError(f"term {t} evaluates to an all-zero column")
        xi = svd_lstsq(term_cols, lhs).astype(cfg.dtype)
        return cols, term_cols, lhs, xi

    for epoch in range(1, epochs + 1):
        try:
            out = plain_forward(net, x_tr, ws_data, q_guard=TRAIN_Q_GUARD)
            resid = out - y_tr
            mse_data = float(np.mean(resid * resid))
            zero_grads(grads)
            plain_backward(net, x_tr, ws_data,
                           (2.0 * cfg.lambda_data / n_tr) * resid, grads)
            if use_pde:
                cols, term_cols, lhs, xi = solve_xi()
                r = lhs - term_cols @ xi
                mse_pde = float(np.mean(r * r))
                dlhs = (2.0 * cfg.lambda_pde / n_meta) * r
                # seeds on gene columns via the product rule
                gene_grads = {g: None for g in cols}
                for j, term in enumerate(constraint.terms):
                    dterm = -xi[j] * dlhs
                    for g in set(term):
                        mult = term.count(g)
                        rest = list(term)
                        rest.remove(g)
                        contrib = dterm.copy()
                        for other in rest:
                            contrib *= cols[other]
                        contrib *= float(mult)
                        if gene_grads[g] is None:
                            gene_grads[g] = contrib
                        else:
                            gene_grads[g] += contrib
                # fold FD genes back onto u_xxx
                for g in sorted(gene_grads, reverse=True):
                    if g > 3 and gene_grads[g] is not None:
                        back = gene_grads[g].reshape(meta.n_x, meta.n_t)
                        back = d_matrix.T @ back
                        flat = back.reshape(-1)
                        if gene_grads[g - 1] is None:
                            gene_grads[g - 1] = flat
                        else:
                            gene_grads[g - 1] = gene_grads[g - 1] + flat
                dcx = [None] * (x_order + 1)
                for g in range(min(3, x_order) + 1):
                    if gene_grads.get(g) is not None:
                        dcx[g] = FACTORIAL[g] * gene_grads[g]
                dct = [None] * (t_order + 1)
                if constraint.lhs == "u_t":
                    dct[1] = dlhs
                else:
                    dct[2] = FACTORIAL[2] * dlhs
                jet_backward(net, pts, ws_x, dcx, grads)
                jet_backward(net, pts, ws_t, dct, grads)
            loss = cfg.lambda_data * mse_data + cfg.lambda_pde * mse_pde
            if not np.isfinite(loss):
                raise TrainingDivergence(epoch, f"loss {loss}")
            adam.step(grads)
        except QDenominatorError as exc:
            raise TrainingDivergence(epoch, str(exc)) from exc
    # final coefficients: double-precision solve on the final parameters
    # (zero epochs leaves the input network untouched, so the coefficients
    # then equal the plain global least-squares fit on its jets)
    final = original.copy() if epochs == 0 else net.astype(np.float64)
    pts64 = meta.points().astype(final.dtype)
    ws_x64 = JetWorkspace(final, n_meta, x_order)
    ws_t64 = JetWorkspace(final, n_meta, t_order)
    d64 = diff_matrix(meta.n_x, meta.dx) if constraint.max_gene > 3 else None
    try:
        cx = jet_forward(final, pts64, SEED_X, x_order, ws_x64,
                         q_guard=TRAIN_Q_GUARD)
        ct = jet_forward(final, pts64, SEED_T, t_order, ws_t64,
                         q_guard=TRAIN_Q_GUARD)
    except QDenominatorError as exc:
        raise TrainingDivergence(epochs, str(exc)) from exc
    _, term_cols, lhs = _constraint_columns(constraint, cx, ct, meta, d64)
    for j, t in enumerate(constraint.terms):
        if not np.any(term_cols[:, j]):
            raise ConstraintError(f"term {t} evaluates to an all-zero column")
    xi = svd_lstsq(term_cols, lhs)
    r = lhs - term_cols @ xi
    mse_pde = float(np.mean(r * r))
    return final, PinnReport(
        epochs_run=epochs, xi=np.asarray(xi, dtype=np.float64),
        mse_data=mse_data, mse_pde=mse_pde)
