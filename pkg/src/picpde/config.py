"""Run configuration: versioned JSON schema, per-PDE defaults, validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .canonical import PRESETS
from .evolution import GaConfig
from .training import TrainConfig

CONFIG_VERSION = 1

DEFAULT_LASSO_ALPHAS = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
DEFAULT_STRIDGE_PENALTIES = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)


class ConfigError(ValueError):
    """Validation failure with field-path diagnostics."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class RunConfig:
    dataset_kind: str                      # "generate" | "load"
    dataset_name: str | None               # canonical PDE id
    dataset_path: str | None
    dataset_overrides: dict
    noise_level: float
    noise_kind: str
    sample_count: int
    activation: str
    hidden_layers: int
    hidden_width: int
    training: TrainConfig
    meta_x: tuple[float, float]
    meta_t: tuple[float, float]
    meta_resolution: tuple[int, int]
    test_resolution: tuple[int, int]
    ga: GaConfig
    n_horizons: int
    top_combinations: int
    pinn_epochs: int
    refine_epochs: int | None
    lhs: str                               # "auto" | "u_t" | "u_tt"
    lasso_alphas: tuple[float, ...]
    stridge_penalties: tuple[float, ...]
    ridge_lambda: float
    ic_max_terms: int
    baseline_target: str | None
    output_dir: str
    workers: int
    seed: int

    @property
    def widths(self) -> tuple[int, ...]:
        return (2, *([self.hidden_width] * self.hidden_layers), 1)

    def child_seeds(self) -> dict[str, int]:
        """Deterministic per-stage seeds derived from the master seed."""
        state = np.random.SeedSequence(self.seed).generate_state(8)
        names = ("noise", "subsample", "net_init", "train_split",
                 "ga_u_t", "ga_u_tt", "stridge", "spare")
        return {n: int(s) for n, s in zip(names, state)}

    def resolved(self) -> dict:
        """Plain JSON-serializable view of every scientific setting.

        Execution-environment knobs (output directory, worker count) are
        excluded so reports and config hashes are byte-stable across
        locations and parallelism levels.
        """
        out = {
            "version": CONFIG_VERSION,
            "dataset": {
                "kind": self.dataset_kind,
                "name": self.dataset_name,
                "path": self.dataset_path,
                "overrides": self.dataset_overrides,
            },
            "noise": {"level": self.noise_level, "kind": self.noise_kind},
            "samples": {"count": self.sample_count},
            "network": {
                "activation": self.activation,
                "hidden_layers": self.hidden_layers,
                "hidden_width": self.hidden_width,
            },
            "training": asdict(self.training),
            "meta": {
                "x_bounds": list(self.meta_x),
                "t_bounds": list(self.meta_t),
                "resolution": list(self.meta_resolution),
                "test_resolution": list(self.test_resolution),
            },
            "ga": asdict(self.ga),
            "selection": {
                "n_horizons": self.n_horizons,
                "top_combinations": self.top_combinations,
                "pinn_epochs": self.pinn_epochs,
                "refine_epochs": self.refine_epochs,
                "lhs": self.lhs,
            },
            "baselines": {
                "lasso_alphas": list(self.lasso_alphas),
                "stridge_penalties": list(self.stridge_penalties),
                "ridge_lambda": self.ridge_lambda,
                "ic_max_terms": self.ic_max_terms,
                "target": self.baseline_target,
            },
            "seed": self.seed,
        }
        return out

    def hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _path(*parts) -> str:
    return ".".join(parts)


def resolve_config(raw: dict) -> RunConfig:
    """Merge a raw config dict with per-PDE defaults; validate everything.

    A minimal config names only the dataset; canonical datasets pull their
    documented meta-grid bounds, activation and GA penalty from presets.
    """
    problems: list[str] = []

    def need(cond, where, msg):
        if not cond:
            problems.append(f"{where}: {msg}")

    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a JSON object"])
    version = raw.get("version", CONFIG_VERSION)
    need(version == CONFIG_VERSION, "version", f"expected {CONFIG_VERSION}")

    ds = raw.get("dataset")
    if not isinstance(ds, dict):
        raise ConfigError(problems + ["dataset: required object"])
    kind = ds.get("kind", "generate" if "name" in ds else "load")
    need(kind in ("generate", "load"), "dataset.kind", "must be generate|load")
    name = ds.get("name")
    path = ds.get("path")
    preset = None
    if kind == "generate":
        need(name in PRESETS, "dataset.name",
             f"unknown PDE (known: {sorted(PRESETS)})")
        preset = PRESETS.get(name)
    else:
        need(isinstance(path, str) and path, "dataset.path", "required for load")
    overrides = ds.get("overrides", {})
    need(isinstance(overrides, dict), "dataset.overrides", "must be an object")

    noise = raw.get("noise", {})
    level = float(noise.get("level", 0.0))
    nkind = noise.get("kind", "gaussian")
    need(level >= 0 and np.isfinite(level), "noise.level", "must be finite and >= 0")
    need(nkind in ("gaussian", "uniform"), "noise.kind", "must be gaussian|uniform")

    samples = raw.get("samples", {})
    count = int(samples.get("count", 10000))
    need(count >= 100, "samples.count", "must be >= 100")

    network = raw.get("network", {})
    activation = network.get("activation", preset.activation if preset else "rational")
    need(activation in ("sin", "rational"), "network.activation", "must be sin|rational")
    hidden_layers = int(network.get("hidden_layers", 5))
    hidden_width = int(network.get("hidden_width", 50))
    need(hidden_layers >= 1, "network.hidden_layers", "must be >= 1")
    need(hidden_width >= 1, "network.hidden_width", "must be >= 1")

    tr = raw.get("training", {})
    try:
        training = TrainConfig(
            learning_rate=float(tr.get("learning_rate", 1e-3)),
            max_epochs=int(tr.get("max_epochs", 30000)),
            patience=int(tr.get("patience", 12)),
            check_interval=int(tr.get("check_interval", 100)),
            val_fraction=float(tr.get("val_fraction", 0.1)),
            min_rel_improvement=float(tr.get("min_rel_improvement", 1e-4)),
            lambda_data=float(tr.get("lambda_data", 1.0)),
            lambda_pde=float(tr.get("lambda_pde", 0.01)),
            compute_dtype=str(tr.get("compute_dtype", "float32")),
        )
    except ValueError as exc:
        problems.append(f"training: {exc}")
        training = TrainConfig()

    meta = raw.get("meta", {})
    meta_x = meta.get("x_bounds", list(preset.meta_x) if preset else None)
    meta_t = meta.get("t_bounds", list(preset.meta_t) if preset else None)
    need(meta_x is not None and meta_t is not None, "meta",
         "x_bounds and t_bounds required for loaded datasets")
    res = meta.get("resolution", [100, 100])
    default_test = [200, 200] if activation == "sin" else [100, 100]
    test_res = meta.get("test_resolution", default_test)
    for nm, pair in (("meta.x_bounds", meta_x), ("meta.t_bounds", meta_t),
                     ("meta.resolution", res), ("meta.test_resolution", test_res)):
        need(isinstance(pair, (list, tuple)) and len(pair) == 2, nm, "needs 2 entries")
    if meta_x and meta_t and len(meta_x) == 2 and len(meta_t) == 2:
        need(meta_x[0] < meta_x[1], "meta.x_bounds", "must be ordered")
        need(meta_t[0] < meta_t[1], "meta.t_bounds", "must be ordered")
        need(min(res) >= 10, "meta.resolution", "must be >= 10 per axis")

    ga_raw = raw.get("ga", {})
    try:
        ga = GaConfig(
            population=int(ga_raw.get("population", 400)),
            generations=int(ga_raw.get("generations", 200)),
            crossover_rate=float(ga_raw.get("crossover_rate", 1.0)),
            add_rate=float(ga_raw.get("add_rate", 0.4)),
            gene_rate=float(ga_raw.get("gene_rate", 0.4)),
            delete_rate=float(ga_raw.get("delete_rate", 0.5)),
            l0_penalty=float(ga_raw.get(
                "l0_penalty", preset.l0_penalty if preset else 0.01)),
            module_cap=int(ga_raw.get("module_cap", 6)),
            seed=0,
        )
    except ValueError as exc:
        problems.append(f"ga: {exc}")
        ga = GaConfig()

    sel = raw.get("selection", {})
    n_horizons = int(sel.get("n_horizons", 10))
    top_combinations = int(sel.get("top_combinations", 5))
    pinn_epochs = int(sel.get("pinn_epochs", 300))
    refine_epochs = sel.get("refine_epochs")
    if refine_epochs is None and preset is not None:
        refine_epochs = preset.refine_epochs
    lhs = sel.get("lhs", "auto")
    need(n_horizons >= 2, "selection.n_horizons", "must be >= 2")
    need(top_combinations >= 1, "selection.top_combinations", "must be >= 1")
    need(pinn_epochs >= 0, "selection.pinn_epochs", "must be >= 0")
    need(refine_epochs is None or int(refine_epochs) >= 0,
         "selection.refine_epochs", "must be >= 0")
    need(lhs in ("auto", "u_t", "u_tt"), "selection.lhs", "must be auto|u_t|u_tt")

    base = raw.get("baselines", {})
    lasso_alphas = tuple(float(a) for a in base.get("lasso_alphas", DEFAULT_LASSO_ALPHAS))
    stridge_penalties = tuple(float(a) for a in
                              base.get("stridge_penalties", DEFAULT_STRIDGE_PENALTIES))
    ridge_lambda = float(base.get("ridge_lambda", 1e-5))
    ic_max_terms = int(base.get("ic_max_terms", 3))
    baseline_target = base.get("target")
    need(all(a >= 0 for a in lasso_alphas), "baselines.lasso_alphas", "must be >= 0")
    need(ridge_lambda >= 0, "baselines.ridge_lambda", "must be >= 0")
    need(baseline_target in (None, "u_t", "u_tt"), "baselines.target",
         "must be u_t|u_tt")

    output_dir = raw.get("output_dir", "out")
    workers = int(raw.get("workers", 1))
    seed = int(raw.get("seed", 0))
    need(workers >= 1, "workers", "must be >= 1")

    if problems:
        raise ConfigError(problems)

    return RunConfig(
        dataset_kind=kind, dataset_name=name, dataset_path=path,
        dataset_overrides=overrides,
        noise_level=level, noise_kind=nkind, sample_count=count,
        activation=activation, hidden_layers=hidden_layers,
        hidden_width=hidden_width, training=training,
        meta_x=tuple(meta_x), meta_t=tuple(meta_t),
        meta_resolution=(int(res[0]), int(res[1])),
        test_resolution=(int(test_res[0]), int(test_res[1])),
        ga=ga, n_horizons=n_horizons, top_combinations=top_combinations,
        pinn_epochs=pinn_epochs,
        refine_epochs=None if refine_epochs is None else int(refine_epochs),
        lhs=lhs, lasso_alphas=lasso_alphas, stridge_penalties=stridge_penalties,
        ridge_lambda=ridge_lambda, ic_max_terms=ic_max_terms,
        baseline_target=baseline_target,
        output_dir=str(output_dir), workers=workers, seed=seed,
    )


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: invalid JSON ({exc})"]) from exc
    return resolve_config(raw)
