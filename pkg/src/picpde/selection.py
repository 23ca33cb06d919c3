"""Combination scoring: moving-horizon redundancy loss, constrained-network
physical loss, their product, and final coefficient refinement."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .genomes import TermLibrary
from .grids import SampleSet
from .network import Mlp
from .numerics import population_std, svd_lstsq
from .terms import format_equation, gene_columns, lhs_column, monomial_column, term_name
from .training import (FieldJet, MetaGrid, PdeConstraint, TrainConfig,
                       TrainingDivergence, eval_meta, train_pinn)

CV_SENTINEL = 1e6
P_LOSS_SENTINEL = 1e6
MIN_HORIZON_COLUMNS = 10


@dataclass(frozen=True)
class Horizon:
    """One time window of the meta grid with its member column indices."""

    t_lo: float
    t_hi: float
    columns: tuple[int, ...]


def build_horizons(meta: MetaGrid, n_h: int) -> list[Horizon]:
    """Overlapping windows T_i = [t_min + i*dt, mid + i*dt], i = 1..n_h,
    with dt = (t_max - t_min) / (2 n_h)."""
    if n_h < 2:
        raise ValueError("need at least 2 horizons")
    t_min, t_max = meta.t_bounds
    dt = (t_max - t_min) / (2.0 * n_h)
    mid = 0.5 * (t_min + t_max)
    ts = meta.ts
    tol = 1e-12 * (t_max - t_min)
    horizons = []
    for i in range(1, n_h + 1):
        lo, hi = t_min + i * dt, mid + i * dt
        cols = tuple(int(j) for j in np.nonzero((ts >= lo - tol) & (ts <= hi + tol))[0])
        if len(cols) < MIN_HORIZON_COLUMNS:
            raise ValueError(
                f"horizon {i} holds {len(cols)} columns (< {MIN_HORIZON_COLUMNS}); "
                "raise the meta-grid temporal resolution"
            )
        horizons.append(Horizon(lo, hi, cols))
    return horizons


@dataclass(frozen=True)
class Combination:
    """A subset of library terms with its globally fitted coefficients."""

    library: TermLibrary
    mask: int
    xi: np.ndarray

    def __post_init__(self):
        if self.mask <= 0 or self.mask >= 1 << len(self.library):
            raise ValueError("mask must select a non-empty subset of the library")
        if len(self.xi) != bin(self.mask).count("1"):
            raise ValueError("coefficient count must match the mask popcount")

    @property
    def lhs(self) -> str:
        return self.library.lhs

    @property
    def terms(self) -> tuple[tuple[int, ...], ...]:
        return tuple(t for i, t in enumerate(self.library.terms) if self.mask >> i & 1)

    def term_names(self) -> list[str]:
        return [term_name(t) for t in self.terms]

    def constraint(self) -> PdeConstraint:
        return PdeConstraint(self.terms, self.lhs)


@dataclass(frozen=True)
class PicScore:
    r_loss: float
    p_loss: float

    @property
    def pic(self) -> float:
        return self.r_loss * self.p_loss


@dataclass
class ScoredCombination:
    combination: Combination
    r_loss: float
    cv: np.ndarray
    p_loss: float | None = None
    pinn_diverged: bool = False

    @property
    def pic(self) -> float | None:
        if self.p_loss is None:
            return None
        return self.r_loss * self.p_loss


@dataclass
class DiscoveredPde:
    lhs: str
    terms: tuple[tuple[int, ...], ...]
    coefficients: np.ndarray
    equation: str
    score_table: list[ScoredCombination]
    provenance: dict = field(default_factory=dict)


class StructureMismatch(ValueError):
    """The discovered and reference PDEs do not share a term set."""


@dataclass(frozen=True)
class ReferencePde:
    lhs: str
    terms: tuple[tuple[int, ...], ...]
    coefficients: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms",
                           tuple(tuple(sorted(t)) for t in self.terms))


def library_matrix(library: TermLibrary, jet: FieldJet) -> tuple[np.ndarray, np.ndarray]:
    """All library term columns plus the LHS column on the jet's meta grid."""
    max_gene = max(g for t in library.terms for g in t)
    cols = gene_columns(jet, max_gene)
    matrix = np.column_stack([monomial_column(t, cols) for t in library.terms])
    return matrix, lhs_column(jet, library.lhs)


def cv_from_coefficients(coeffs: np.ndarray) -> np.ndarray:
    """Coefficient of variation per term from an (n_h, k) coefficient table.

    Uses the population standard deviation; near-zero means (|mu| < 1e-12)
    are assigned the documented sentinel."""
    coeffs = np.asarray(coeffs, dtype=float)
    sigma = population_std(coeffs, axis=0)
    mu = np.abs(coeffs.mean(axis=0))
    out = np.full(coeffs.shape[1], CV_SENTINEL)
    ok = mu >= 1e-12
    out[ok] = sigma[ok] / mu[ok]
    return out


def horizon_coefficients(term_cols: np.ndarray, lhs_col: np.ndarray,
                         horizons: list[Horizon], meta: MetaGrid) -> np.ndarray:
    """Per-horizon SVD least-squares coefficients, shape (n_h, k)."""
    k = term_cols.shape[1]
    mat3 = term_cols.reshape(meta.n_x, meta.n_t, k)
    lhs3 = lhs_col.reshape(meta.n_x, meta.n_t)
    out = np.empty((len(horizons), k))
    for i, h in enumerate(horizons):
        cols = list(h.columns)
        sub = mat3[:, cols, :].reshape(-1, k)
        target = lhs3[:, cols].reshape(-1)
        if sub.shape[0] < k:
            raise ValueError(f"horizon {i + 1}: fewer rows than terms")
        out[i] = svd_lstsq(sub, target)
    return out


def r_loss(combination: Combination, jet: FieldJet,
           horizons: list[Horizon]) -> tuple[float, np.ndarray]:
    """Mean coefficient of variation of the per-horizon fits."""
    matrix, lhs = library_matrix(combination.library, jet)
    sel = [i for i in range(len(combination.library)) if combination.mask >> i & 1]
    coeffs = horizon_coefficients(matrix[:, sel], lhs, horizons, jet.meta)
    cv = cv_from_coefficients(coeffs)
    return float(cv.mean()), cv


def p_loss(combination: Combination, ann: Mlp, data: SampleSet,
           meta: MetaGrid, cfg: TrainConfig, epochs: int = 300,
           test_meta: MetaGrid | None = None) -> tuple[float, bool]:
    """Standardized RMSE between the constrained and unconstrained networks.

    The constrained copy trains for ``epochs`` with the combination as its
    PDE penalty; outputs are standardized by the observation min/max and
    compared on ``test_meta`` (defaults to the training meta grid). A
    diverging run scores the documented sentinel instead of raising.
    """
    u_min, u_max = float(data.us.min()), float(data.us.max())
    if u_max == u_min:
        raise ValueError("degenerate observations: u_max == u_min")
    grid = test_meta if test_meta is not None else meta
    try:
        pinn, _ = train_pinn(ann, data, combination.constraint(), meta, epochs, cfg)
    except TrainingDivergence:
        return P_LOSS_SENTINEL, True
    jet_ann = _plain_on_grid(ann, grid)
    jet_pinn = _plain_on_grid(pinn, grid)
    diff = (jet_pinn - jet_ann) / (u_max - u_min)
    return float(np.sqrt(np.mean(diff * diff))), False


def _plain_on_grid(net: Mlp, meta: MetaGrid) -> np.ndarray:
    from .autodiff import forward_values

    pts = meta.points()
    return forward_values(net, pts[:, 0], pts[:, 1])


def global_fit(library: TermLibrary, jet: FieldJet, mask: int) -> np.ndarray:
    matrix, lhs = library_matrix(library, jet)
    sel = [i for i in range(len(library)) if mask >> i & 1]
    return svd_lstsq(matrix[:, sel], lhs)


def pic_rank(libraries: dict[str, TermLibrary], jets: dict[str, FieldJet],
             ann: Mlp, data: SampleSet, cfg: TrainConfig, *,
             n_horizons: int = 10, top_combinations: int = 5,
             pinn_epochs: int = 300,
             test_meta: dict[str, MetaGrid] | None = None,
             workers: int = 1) -> list[ScoredCombination]:
    """Score all non-empty term subsets per LHS candidate.

    r-loss is computed for every subset; the ``top_combinations`` lowest
    per LHS also receive a p-loss and hence a PIC. The table is returned
    in canonical order (LHS, then ascending mask); the winner is the
    minimum-PIC row. Concurrency never changes results: constrained
    trainings are independent sessions assembled in submission order.
    """
    table: list[ScoredCombination] = []
    to_train: list[ScoredCombination] = []
    for lhs in ("u_t", "u_tt"):
        lib = libraries.get(lhs)
        if lib is None:
            continue
        jet = jets[lhs]
        horizons = build_horizons(jet.meta, n_horizons)
        matrix, lhs_col = library_matrix(lib, jet)
        rows: list[ScoredCombination] = []
        for mask in range(1, 1 << len(lib)):
            sel = [i for i in range(len(lib)) if mask >> i & 1]
            xi = svd_lstsq(matrix[:, sel], lhs_col)
            combo = Combination(lib, mask, xi)
            coeffs = horizon_coefficients(matrix[:, sel], lhs_col, horizons, jet.meta)
            cv = cv_from_coefficients(coeffs)
            rows.append(ScoredCombination(combo, float(cv.mean()), cv))
        rows_by_r = sorted(rows, key=lambda s: (s.r_loss, s.combination.mask))
        to_train.extend(rows_by_r[:top_combinations])
        table.extend(rows)

    def run(scored: ScoredCombination):
        grid = None
        if test_meta is not None:
            grid = test_meta.get(scored.combination.lhs)
        return p_loss(scored.combination, ann, data,
                      jets[scored.combination.lhs].meta, cfg,
                      epochs=pinn_epochs, test_meta=grid)

    if workers > 1 and len(to_train) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, to_train))
    else:
        results = [run(s) for s in to_train]
    for scored, (lp, diverged) in zip(to_train, results):
        scored.p_loss = lp
        scored.pinn_diverged = diverged
    return table


def pic_winner(table: list[ScoredCombination]) -> ScoredCombination:
    scored = [s for s in table if s.pic is not None]
    if not scored:
        raise ValueError("no combination carries a PIC score")
    return min(scored, key=lambda s: (s.pic, s.combination.lhs, s.combination.mask))


def refine_coefficients(winner: ScoredCombination, ann: Mlp, data: SampleSet,
                        jets: dict[str, FieldJet], cfg: TrainConfig,
                        epochs: int | None = None,
                        table: list[ScoredCombination] | None = None,
                        provenance: dict | None = None) -> DiscoveredPde:
    """Constrained retraining of the winner; coefficients from the final
    epoch's least-squares solve (1000 epochs for u_t, 3000 for u_tt by
    default)."""
    combo = winner.combination
    if epochs is None:
        epochs = 3000 if combo.lhs == "u_tt" else 1000
    meta = jets[combo.lhs].meta
    _, report = train_pinn(ann, data, combo.constraint(), meta, epochs, cfg)
    xi = report.xi
    return DiscoveredPde(
        lhs=combo.lhs,
        terms=combo.terms,
        coefficients=np.asarray(xi),
        equation=format_equation(combo.lhs, combo.terms, xi),
        score_table=table if table is not None else [winner],
        provenance=provenance or {},
    )


def coefficient_error(found: DiscoveredPde, truth: ReferencePde) -> float:
    """Mean relative coefficient error against a reference PDE.

    Raises StructureMismatch when the term sets (or LHS) differ, so a
    wrong structure is reported as such rather than as a number."""
    found_terms = tuple(tuple(sorted(t)) for t in found.terms)
    if found.lhs != truth.lhs or set(found_terms) != set(truth.terms):
        raise StructureMismatch(
            f"found {found.lhs} ~ {[term_name(t) for t in found_terms]}, "
            f"expected {truth.lhs} ~ {[term_name(t) for t in truth.terms]}"
        )
    ref = dict(zip(truth.terms, truth.coefficients))
    errs = [abs(c - ref[t]) / abs(ref[t])
            for t, c in zip(found_terms, found.coefficients)]
    return float(np.mean(errs))
