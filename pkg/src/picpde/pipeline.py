"""End-to-end orchestration: data, surrogate, structure search, scoring,
refinement, and the baseline sweeps."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from itertools import combinations as iter_combinations

import numpy as np

from .baselines import (THETA_NAMES, THETA_TERMS, build_theta, ic_score, lasso,
                        noise_metrics, stridge)
from .canonical import PRESETS, generate_dataset
from .config import RunConfig
from .evolution import evolve
from .genomes import canonicalize
from .grids import GridField, NoiseSpec, SampleSet, add_noise, load_grid, subsample
from .network import init_mlp
from .selection import (DiscoveredPde, ReferencePde, ScoredCombination, pic_rank,
                        pic_winner, refine_coefficients)
from .terms import term_name
from .training import MetaGrid, TrainConfig, eval_meta, train_surrogate

log = logging.getLogger("picpde")


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class Prepared:
    clean: GridField
    noisy: GridField
    samples: SampleSet
    ann: object
    jet: object
    surrogate_report: object
    seeds: dict
    timings: dict = field(default_factory=dict)


def _stage(timings: dict, name: str):
    class _Timer:
        def __enter__(self):
            self.t0 = time.perf_counter()
            log.info("stage %s: start", name)
            return self

        def __exit__(self, exc_type, exc, tb):
            timings[name] = round(time.perf_counter() - self.t0, 3)
            log.info("stage %s: done in %.1fs", name, timings[name])
            return False

    return _Timer()


def make_dataset(cfg: RunConfig) -> GridField:
    if cfg.dataset_kind == "generate":
        ov = cfg.dataset_overrides
        return generate_dataset(
            cfg.dataset_name,
            n_x=ov.get("n_x"), n_t=ov.get("n_t"),
            x_span=tuple(ov["x_span"]) if "x_span" in ov else None,
            t_span=tuple(ov["t_span"]) if "t_span" in ov else None,
            ic=ov.get("ic"), solver_dt=ov.get("solver_dt"),
        )
    return load_grid(cfg.dataset_path)


def prepare(cfg: RunConfig) -> Prepared:
    """Shared front half of every command: data, samples, surrogate, jet."""
    seeds = cfg.child_seeds()
    timings: dict = {}
    try:
        with _stage(timings, "dataset"):
            clean = make_dataset(cfg)
            noisy = add_noise(clean, NoiseSpec(cfg.noise_level, cfg.noise_kind,
                                               seeds["noise"])) \
                if cfg.noise_level > 0 else clean
    except Exception as exc:
        raise StageError("dataset", exc) from exc
    try:
        with _stage(timings, "sampling"):
            samples = subsample(noisy, cfg.sample_count, seeds["subsample"])
    except Exception as exc:
        raise StageError("sampling", exc) from exc
    try:
        with _stage(timings, "surrogate"):
            train_cfg = _train_cfg(cfg, seeds)
            net0 = init_mlp(cfg.widths, cfg.activation, seeds["net_init"])
            ann, report = train_surrogate(net0, samples, train_cfg)
            log.info("surrogate: %d epochs, best val %.3e",
                     report.epochs_run, report.best_val)
    except Exception as exc:
        raise StageError("surrogate", exc) from exc
    try:
        with _stage(timings, "meta"):
            meta = MetaGrid(cfg.meta_x, cfg.meta_t, *cfg.meta_resolution)
            meta.check_inside(samples.x_bounds, samples.t_bounds)
            jet = eval_meta(ann, meta)
    except Exception as exc:
        raise StageError("meta", exc) from exc
    return Prepared(clean, noisy, samples, ann, jet, report, seeds, timings)


def _train_cfg(cfg: RunConfig, seeds: dict) -> TrainConfig:
    t = cfg.training
    return TrainConfig(
        learning_rate=t.learning_rate, max_epochs=t.max_epochs,
        patience=t.patience, check_interval=t.check_interval,
        val_fraction=t.val_fraction, min_rel_improvement=t.min_rel_improvement,
        lambda_data=t.lambda_data, lambda_pde=t.lambda_pde,
        seed=seeds["train_split"],
    )


@dataclass
class DiscoverOutput:
    discovered: DiscoveredPde
    prepared: Prepared
    libraries: dict
    ga_traces: dict
    table: list
    timings: dict


def discover_from(prep: Prepared, cfg: RunConfig) -> DiscoverOutput:
    timings = dict(prep.timings)
    seeds = prep.seeds
    lhs_candidates = ("u_t", "u_tt") if cfg.lhs == "auto" else (cfg.lhs,)
    libraries, traces = {}, {}
    try:
        with _stage(timings, "evolution"):
            for lhs in lhs_candidates:
                ga_cfg = _ga_cfg(cfg, seeds, lhs)
                best, best_fit, trace = evolve(prep.jet, ga_cfg, lhs)
                lib = canonicalize(best)
                libraries[lhs] = lib
                traces[lhs] = trace
                log.info("GA %s: best %s (F=%.3e) -> library %s",
                         lhs, best.describe(), best_fit, lib.names())
    except Exception as exc:
        raise StageError("evolution", exc) from exc
    try:
        with _stage(timings, "ranking"):
            jets = {lhs: prep.jet for lhs in lhs_candidates}
            test_meta = {
                lhs: MetaGrid(cfg.meta_x, cfg.meta_t, *cfg.test_resolution)
                for lhs in lhs_candidates
            }
            train_cfg = _train_cfg(cfg, seeds)
            table = pic_rank(
                libraries, jets, prep.ann, prep.samples, train_cfg,
                n_horizons=cfg.n_horizons,
                top_combinations=cfg.top_combinations,
                pinn_epochs=cfg.pinn_epochs, test_meta=test_meta,
                workers=cfg.workers,
            )
            winner = pic_winner(table)
            log.info("winner: %s %s (r=%.3e p=%.3e)", winner.combination.lhs,
                     winner.combination.term_names(), winner.r_loss, winner.p_loss)
    except Exception as exc:
        raise StageError("ranking", exc) from exc
    try:
        with _stage(timings, "refinement"):
            provenance = {
                "config_hash": cfg.hash(),
                "master_seed": cfg.seed,
                "stage_seeds": seeds,
                "surrogate_epochs": prep.surrogate_report.epochs_run,
                "surrogate_best_val": prep.surrogate_report.best_val,
            }
            discovered = refine_coefficients(
                winner, prep.ann, prep.samples, jets, train_cfg,
                epochs=cfg.refine_epochs, table=table, provenance=provenance,
            )
            log.info("refined: %s", discovered.equation)
    except Exception as exc:
        raise StageError("refinement", exc) from exc
    return DiscoverOutput(discovered, prep, libraries, traces, table, timings)


def _ga_cfg(cfg: RunConfig, seeds: dict, lhs: str):
    g = cfg.ga
    from .evolution import GaConfig

    return GaConfig(
        population=g.population, generations=g.generations,
        crossover_rate=g.crossover_rate, add_rate=g.add_rate,
        gene_rate=g.gene_rate, delete_rate=g.delete_rate,
        l0_penalty=g.l0_penalty, module_cap=g.module_cap,
        seed=seeds[f"ga_{lhs}"],
    )


def discover(cfg: RunConfig) -> DiscoverOutput:
    return discover_from(prepare(cfg), cfg)


@dataclass
class BaselineOutput:
    target_lhs: str
    lasso_rows: list
    stridge_rows: list
    ic_rows: list
    noise_stats: tuple | None
    prepared: Prepared
    timings: dict


def baselines_from(prep: Prepared, cfg: RunConfig) -> BaselineOutput:
    timings = dict(prep.timings)
    target_lhs = cfg.baseline_target or ("u_tt" if cfg.lhs == "u_tt" else "u_t")
    jet = prep.jet
    target = jet.u_t if target_lhs == "u_t" else jet.u_tt
    try:
        with _stage(timings, "baselines"):
            theta = build_theta(jet)
            lasso_rows = []
            for alpha in cfg.lasso_alphas:
                res = lasso(theta, target, alpha)
                lasso_rows.append({
                    "alpha": alpha,
                    "support": [THETA_NAMES[i] for i in res.support],
                    "coefficients": res.coefficients.tolist(),
                    "intercept": res.intercept,
                    "converged": res.converged,
                })
            stridge_rows = []
            for res in stridge(theta, target, ridge_lambda=cfg.ridge_lambda,
                               l0_penalties=cfg.stridge_penalties,
                               seed=prep.seeds["stridge"]):
                stridge_rows.append({
                    "l0_penalty": res.l0_penalty,
                    "threshold": res.threshold,
                    "support": [THETA_NAMES[i] for i in res.support],
                    "coefficients": res.coefficients.tolist(),
                })
            ic_rows = []
            idx = range(len(THETA_TERMS))
            for size in range(1, cfg.ic_max_terms + 1):
                for sel in iter_combinations(idx, size):
                    cols = theta.columns[:, sel]
                    ic_rows.append({
                        "terms": [THETA_NAMES[i] for i in sel],
                        "aic": ic_score(cols, target, "AIC"),
                        "bic": ic_score(cols, target, "BIC"),
                    })
            noise_stats = None
            if cfg.noise_level > 0:
                noise_stats = noise_metrics(prep.clean, prep.noisy)
    except Exception as exc:
        raise StageError("baselines", exc) from exc
    return BaselineOutput(target_lhs, lasso_rows, stridge_rows, ic_rows,
                          noise_stats, prep, timings)


def reference_pde(name: str) -> ReferencePde:
    preset = PRESETS[name]
    return ReferencePde(preset.lhs, preset.true_terms, preset.true_coeffs)


def ic_rank_library(library, jet, kind: str) -> list[dict]:
    """AIC/BIC scores of every non-empty subset of a discovered library."""
    from .selection import library_matrix

    matrix, lhs_col = library_matrix(library, jet)
    rows = []
    for mask in range(1, 1 << len(library)):
        sel = [i for i in range(len(library)) if mask >> i & 1]
        rows.append({
            "mask": mask,
            "terms": [term_name(library.terms[i]) for i in sel],
            "score": ic_score(matrix[:, sel], lhs_col, kind),
        })
    rows.sort(key=lambda r: (r["score"], r["mask"]))
    return rows
