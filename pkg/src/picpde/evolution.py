"""Genetic search over genome-encoded PDE structures on a fixed field jet."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .genomes import Genome, crossover, mutate, random_genome
from .numerics import diff_matrix, svd_lstsq
from .terms import gene_columns, lhs_column, monomial_column
from .training import FieldJet

# RNG sub-stream tags so every draw has a reproducible (seed, gen, slot) address.
_PAIR_STREAM = 1 << 20
_FRESH_BASE = (1 << 20) + 1


@dataclass(frozen=True)
class GaConfig:
    population: int = 400
    generations: int = 200
    crossover_rate: float = 1.0
    add_rate: float = 0.4
    gene_rate: float = 0.4
    delete_rate: float = 0.5
    l0_penalty: float = 0.01
    module_cap: int = 6
    seed: int = 0

    def __post_init__(self):
        for name in ("crossover_rate", "add_rate", "gene_rate", "delete_rate"):
            r = getattr(self, name)
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.population < 2 or self.population % 2:
            raise ValueError("population must be even and >= 2")
        if self.generations < 0 or self.module_cap < 1 or self.l0_penalty < 0:
            raise ValueError("generations/module_cap/l0_penalty out of range")


def translate(genome: Genome, jet: FieldJet):
    """Numeric columns of every module on the meta grid.

    Returns (n_points x n_modules matrix, lhs column, per-module finite flags).
    Inner genes read straight off the jet; the outer derivative is applied
    afterwards by repeated central x-differencing (one-sided at the edges).
    """
    meta = jet.meta
    max_gene = max(g for inner, _ in genome.modules for g in inner)
    cols = gene_columns(jet, max_gene)
    d = diff_matrix(meta.n_x, meta.dx)
    out = np.empty((meta.n_x * meta.n_t, len(genome.modules)))
    finite = np.empty(len(genome.modules), dtype=bool)
    for j, (inner, outer) in enumerate(genome.modules):
        col = monomial_column(inner, cols)
        if outer:
            grid = col.reshape(meta.n_x, meta.n_t)
            for _ in range(outer):
                grid = d @ grid
            col = grid.reshape(-1)
        out[:, j] = col
        finite[j] = bool(np.all(np.isfinite(col)))
    return out, lhs_column(jet, genome.lhs), finite


def fitness(genome: Genome, jet: FieldJet, l0_penalty: float):
    """Fitness = residual MSE of the SVD least-squares fit + l0 penalty.

    Returns (fitness, coefficients, mse). Modules whose columns overflow
    make the genome infinitely unfit.
    """
    matrix, lhs, finite = translate(genome, jet)
    if not finite.all():
        return float("inf"), np.full(len(genome), np.nan), float("inf")
    if not matrix.any():
        raise ValueError("all-zero term matrix")
    xi = svd_lstsq(matrix, lhs)
    resid = lhs - matrix @ xi
    mse = float(np.mean(resid * resid))
    return mse + l0_penalty * len(genome), xi, mse


class _Evaluator:
    """Memoizes genome fitness across a run (populations converge quickly)."""

    def __init__(self, jet: FieldJet, l0_penalty: float):
        self.jet = jet
        self.l0 = l0_penalty
        self.cache: dict[Genome, tuple[float, np.ndarray, float]] = {}

    def __call__(self, genome: Genome):
        hit = self.cache.get(genome)
        if hit is None:
            hit = fitness(genome, self.jet, self.l0)
            self.cache[genome] = hit
        return hit


def _rank_key(item):
    genome, fit = item
    return (fit, len(genome), genome.modules)


def evolve(jet: FieldJet, cfg: GaConfig, lhs: str):
    """Run the generational loop; returns (best genome, fitness, trace).

    Per generation: shuffle into pairs, cross over, mutate, evaluate,
    retain the better half (ties to fewer modules, then lexicographic),
    refill with fresh random genomes. The incumbent best is reinserted if
    a generation loses it, so the best-fitness trace is non-increasing.
    Every random draw uses its own (seed, generation, slot) stream.
    """
    seed = cfg.seed
    pop_n = cfg.population
    ev = _Evaluator(jet, cfg.l0_penalty)

    population = [random_genome(np.random.default_rng([seed, 0, s]), lhs)
                  for s in range(pop_n)]
    fits = [ev(g)[0] for g in population]
    best_genome, best_fit = min(zip(population, fits), key=_rank_key)
    trace = [{"generation": 0, "best_fitness": best_fit,
              "best_genome": best_genome.describe()}]

    for gen in range(1, cfg.generations + 1):
        order = np.random.default_rng([seed, gen, _PAIR_STREAM]).permutation(pop_n)
        children: list[Genome] = [None] * pop_n
        for k in range(pop_n // 2):
            i, j = int(order[2 * k]), int(order[2 * k + 1])
            rng_pair = np.random.default_rng([seed, gen, k])
            a, b = population[i], population[j]
            if rng_pair.random() < cfg.crossover_rate:
                a, b = crossover(a, b, rng_pair)
            children[2 * k], children[2 * k + 1] = a, b
        for s in range(pop_n):
            children[s] = mutate(
                children[s], np.random.default_rng([seed, gen, pop_n + s]),
                delete_rate=cfg.delete_rate, add_rate=cfg.add_rate,
                gene_rate=cfg.gene_rate, module_cap=cfg.module_cap,
            )
        fits = [ev(g)[0] for g in children]
        gen_best = min(fits)
        if gen_best > best_fit:
            worst = int(np.argmax(fits))
            children[worst] = best_genome
            fits[worst] = best_fit
        best_genome, best_fit = min(zip(children, fits), key=_rank_key)
        trace.append({"generation": gen, "best_fitness": best_fit,
                      "best_genome": best_genome.describe()})
        ranked = sorted(zip(children, fits), key=_rank_key)
        survivors = [g for g, _ in ranked[: pop_n // 2]]
        fresh = [random_genome(np.random.default_rng([seed, gen, _FRESH_BASE + s]), lhs)
                 for s in range(pop_n - len(survivors))]
        population = survivors + fresh
    return best_genome, best_fit, trace
