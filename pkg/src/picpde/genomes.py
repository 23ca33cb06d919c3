"""Genome encoding of candidate PDE structures and its symbolic algebra.

A gene module is a multiset of derivative-order genes (its inner product)
together with an outer x-derivative order, e.g. ((1, 2), 1) reads as
d(u_x * u_xx)/dx. A genome is a duplicate-free sorted set of modules plus
the LHS choice. Canonicalization expands outer derivatives by the product
rule into a flat library of monomial terms with numeric multiplicities
dropped (coefficients are re-fit downstream).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .terms import term_name

MAX_GENE_GA = 3
MAX_OUTER = 3
MAX_GENE_CANONICAL = 6
MAX_INNER_SIZE = 3
DEFAULT_MODULE_CAP = 6
MAX_LIBRARY_TERMS = 12

Module = tuple[tuple[int, ...], int]  # (sorted inner genes, outer order)


def make_module(inner, outer: int) -> Module:
    inner = tuple(sorted(int(g) for g in inner))
    if not inner:
        raise ValueError("inner term must not be empty")
    if any(g < 0 for g in inner):
        raise ValueError("genes must be non-negative")
    if not 0 <= outer <= MAX_OUTER:
        raise ValueError(f"outer order must lie in [0, {MAX_OUTER}]")
    return (inner, int(outer))


@dataclass(frozen=True)
class Genome:
    modules: tuple[Module, ...]
    lhs: str

    def __post_init__(self):
        mods = tuple(sorted(set(make_module(i, o) for i, o in self.modules)))
        object.__setattr__(self, "modules", mods)
        if not self.modules:
            raise ValueError("genome needs at least one module")
        if self.lhs not in ("u_t", "u_tt"):
            raise ValueError(f"unknown LHS {self.lhs!r}")

    def __len__(self) -> int:
        return len(self.modules)

    def describe(self) -> str:
        parts = []
        for inner, outer in self.modules:
            body = term_name(inner)
            if outer:
                parts.append(f"d{outer}({body})/dx{outer}" if outer > 1 else f"d({body})/dx")
            else:
                parts.append(body)
        return " + ".join(parts)


@dataclass(frozen=True)
class TermLibrary:
    """Ordered monomial terms (the preliminary library) with their LHS."""

    terms: tuple[tuple[int, ...], ...]
    lhs: str

    def __post_init__(self):
        terms = tuple(tuple(sorted(t)) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        if len(set(terms)) != len(terms):
            raise ValueError("library terms must be distinct")
        if not 1 <= len(terms) <= MAX_LIBRARY_TERMS:
            raise ValueError(
                f"library must hold 1..{MAX_LIBRARY_TERMS} terms, got {len(terms)}"
            )

    def __len__(self) -> int:
        return len(self.terms)

    def names(self) -> list[str]:
        return [term_name(t) for t in self.terms]


def random_module(rng: np.random.Generator) -> Module:
    size = int(rng.integers(1, MAX_INNER_SIZE + 1))
    inner = tuple(int(g) for g in rng.integers(0, MAX_GENE_GA + 1, size=size))
    outer = int(rng.integers(0, MAX_OUTER + 1))
    return make_module(inner, outer)


def random_genome(rng: np.random.Generator, lhs: str,
                  max_initial_modules: int = 3) -> Genome:
    n = int(rng.integers(1, max_initial_modules + 1))
    return Genome(tuple(random_module(rng) for _ in range(n)), lhs)


def crossover(a: Genome, b: Genome, rng: np.random.Generator) -> tuple[Genome, Genome]:
    """Exchange one uniformly chosen module between the parents."""
    i = int(rng.integers(0, len(a)))
    j = int(rng.integers(0, len(b)))
    mods_a = list(a.modules)
    mods_b = list(b.modules)
    mods_a[i], mods_b[j] = mods_b[j], mods_a[i]
    return Genome(tuple(mods_a), a.lhs), Genome(tuple(mods_b), b.lhs)


def mutate(g: Genome, rng: np.random.Generator, *, delete_rate: float,
           add_rate: float, gene_rate: float,
           module_cap: int = DEFAULT_MODULE_CAP) -> Genome:
    """Apply delete-module, add-module and gene mutations independently.

    Deletion is skipped on single-module genomes; addition respects the
    module cap (and set semantics: re-adding an existing module is a no-op).
    """
    mods = list(g.modules)
    if rng.random() < delete_rate and len(mods) > 1:
        del mods[int(rng.integers(0, len(mods)))]
    if rng.random() < add_rate and len(mods) < module_cap:
        mods.append(random_module(rng))
    if rng.random() < gene_rate:
        k = int(rng.integers(0, len(mods)))
        inner, outer = mods[k]
        genes = list(inner)
        pos = int(rng.integers(0, len(genes)))
        genes[pos] = int(rng.integers(0, MAX_GENE_GA + 1))
        mods[k] = make_module(genes, outer)
    return Genome(tuple(mods), g.lhs)


def _differentiate_monomials(monomials: set[tuple[int, ...]]) -> set[tuple[int, ...]]:
    """One symbolic x-derivative of each monomial, multiplicities dropped."""
    out: set[tuple[int, ...]] = set()
    for mono in monomials:
        for idx in range(len(mono)):
            lifted = list(mono)
            lifted[idx] += 1
            out.add(tuple(sorted(lifted)))
    return out


def canonicalize(g: Genome) -> TermLibrary:
    """Expand every module into monomial terms of the preliminary library."""
    collected: set[tuple[int, ...]] = set()
    for inner, outer in g.modules:
        monos = {inner}
        for _ in range(outer):
            monos = _differentiate_monomials(monos)
        collected |= monos
    for mono in collected:
        if max(mono) > MAX_GENE_CANONICAL:
            raise ValueError(
                f"term {mono} exceeds derivative order {MAX_GENE_CANONICAL}"
            )
    ordered = tuple(sorted(collected, key=lambda t: (len(t), t)))
    return TermLibrary(ordered, g.lhs)
