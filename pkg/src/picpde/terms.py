"""Naming and numeric evaluation of derivative-monomial terms.

A *gene* is an integer spatial-derivative order (0 -> u, 1 -> u_x, ...).
A *monomial term* is a sorted tuple of genes whose columns multiply
pointwise. Genes above order 3 are obtained by finite-differencing the
u_xxx column along the meta-grid x axis.
"""

from __future__ import annotations

import numpy as np

from .numerics import diff_matrix

MAX_GENE = 6
_JET_KEYS = ("u", "u_x", "u_xx", "u_xxx")

LHS_NAMES = ("u_t", "u_tt")


def gene_name(g: int) -> str:
    if g == 0:
        return "u"
    return "u_" + "x" * g


def term_name(genes: tuple[int, ...]) -> str:
    return "*".join(gene_name(g) for g in genes)


def gene_columns(jet, max_gene: int) -> dict[int, np.ndarray]:
    """Columns for genes 0..max_gene from a jet's u..u_xxx entries.

    ``jet`` exposes .u/.u_x/.u_xx/.u_xxx arrays of shape (n_x * n_t,) in
    x-major order plus .meta with n_x, n_t, dx. Orders 4..6 come from
    repeated spatial differencing of u_xxx.
    """
    if not 0 <= max_gene <= MAX_GENE:
        raise ValueError(f"gene order must be in [0, {MAX_GENE}]")
    cols = {g: getattr(jet, _JET_KEYS[g]) for g in range(min(max_gene, 3) + 1)}
    if max_gene > 3:
        meta = jet.meta
        d = diff_matrix(meta.n_x, meta.dx)
        current = jet.u_xxx.reshape(meta.n_x, meta.n_t)
        for g in range(4, max_gene + 1):
            current = d @ current
            cols[g] = current.reshape(-1)
    return cols


def monomial_column(genes: tuple[int, ...], cols: dict[int, np.ndarray]) -> np.ndarray:
    out = cols[genes[0]].copy()
    for g in genes[1:]:
        out *= cols[g]
    return out


def lhs_column(jet, lhs: str) -> np.ndarray:
    if lhs == "u_t":
        return jet.u_t
    if lhs == "u_tt":
        return jet.u_tt
    raise ValueError(f"unknown LHS {lhs!r}")


def format_equation(lhs: str, genes: tuple, coefficients, digits: int = 4) -> str:
    """Pretty-print, e.g. ``u_t = -1.043*u*u_x - 0.0026*u_xxx``."""
    parts = []
    for term, coef in zip(genes, coefficients):
        mag = f"{abs(coef):.{digits}g}"
        body = f"{mag}*{term_name(term)}"
        if not parts:
            parts.append(("-" if coef < 0 else "") + body)
        else:
            parts.append(("- " if coef < 0 else "+ ") + body)
    return f"{lhs} = " + " ".join(parts)
