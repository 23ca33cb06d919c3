"""Batch command-line front end.

Commands: ``pic gen-data|discover|baseline|compare -c CONFIG``.
Exit codes: 0 success, 2 config validation failure, 3 pipeline failure
(stage named in a machine-readable error record on stderr).

BLAS thread pools are pinned to one thread before numpy loads so results
are byte-identical regardless of machine load or the ``--workers`` flag;
parallelism is managed explicitly by the pipeline.
"""

import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import json
import logging
import sys


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pic",
        description="PDE discovery by redundancy/physical-loss ranking, "
                    "with sparse-regression baselines",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("gen-data", "generate a canonical dataset and write grid files"),
        ("discover", "run the full discovery pipeline"),
        ("baseline", "run Lasso/STRidge/AIC-BIC sweeps"),
        ("compare", "run discover plus baselines and a side-by-side report"),
    ):
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("-c", "--config", required=True, help="config file (JSON)")
        cmd.add_argument("--out", default=None, help="override output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override master seed")
        cmd.add_argument("--workers", type=int, default=None,
                         help="override worker count")
    return parser


def _error_record(stage: str, message: str) -> str:
    return json.dumps({"error": {"stage": stage, "message": message}},
                      sort_keys=True)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    level_name = os.environ.get("PIC_LOG", "info").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )

    from dataclasses import replace

    from .config import ConfigError, load_config

    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg = replace(cfg, output_dir=args.out)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError(["workers: must be >= 1"])
            cfg = replace(cfg, workers=args.workers)
    except ConfigError as exc:
        for problem in exc.problems:
            print(_error_record("config", problem), file=sys.stderr)
        return 2
    except OSError as exc:
        print(_error_record("config", str(exc)), file=sys.stderr)
        return 2

    from . import reports
    from .pipeline import StageError

    reports.ensure_dir(cfg.output_dir)
    try:
        if args.command == "gen-data":
            _run_gen_data(cfg)
        elif args.command == "discover":
            _run_discover(cfg)
        elif args.command == "baseline":
            _run_baseline(cfg)
        else:
            _run_compare(cfg)
    except StageError as exc:
        print(_error_record(exc.stage, str(exc.cause)), file=sys.stderr)
        return 3
    return 0


def _dataset_stem(cfg) -> str:
    if cfg.dataset_kind == "generate":
        return cfg.dataset_name
    base = os.path.basename(cfg.dataset_path)
    return os.path.splitext(base)[0]


def _run_gen_data(cfg) -> None:
    from .grids import NoiseSpec, add_noise, save_grid
    from .pipeline import StageError, make_dataset

    try:
        clean = make_dataset(cfg)
    except Exception as exc:
        raise StageError("dataset", exc) from exc
    stem = _dataset_stem(cfg)
    out = os.path.join(cfg.output_dir, f"{stem}_clean.txt")
    save_grid(clean, out)
    logging.getLogger("picpde").info("wrote %s", out)
    if cfg.noise_level > 0:
        seeds = cfg.child_seeds()
        noisy = add_noise(clean, NoiseSpec(cfg.noise_level, cfg.noise_kind,
                                           seeds["noise"]))
        out = os.path.join(cfg.output_dir, f"{stem}_noisy.txt")
        save_grid(noisy, out)
        logging.getLogger("picpde").info("wrote %s", out)


def _write_discover_artifacts(cfg, result) -> None:
    from . import reports

    d = result.discovered
    out = cfg.output_dir
    reports.write_json(reports.discovered_json(d, cfg.resolved(), cfg.hash()),
                       os.path.join(out, "report.json"))
    reports.write_text(reports.scores_csv(d.score_table),
                       os.path.join(out, "scores.csv"))
    reports.write_text(reports.discovered_text(d, cfg.hash()),
                       os.path.join(out, "equation.txt"))
    reports.write_text(reports.ga_trace_jsonl(result.ga_traces),
                       os.path.join(out, "ga_trace.jsonl"))
    reports.write_json({"timings_s": result.timings},
                       os.path.join(out, "timings.json"))


def _run_discover(cfg) -> None:
    from .pipeline import discover

    result = discover(cfg)
    _write_discover_artifacts(cfg, result)


def _write_baseline_artifacts(cfg, result, stem="") -> None:
    from . import reports

    out = cfg.output_dir
    reports.write_text(reports.lasso_csv(result.lasso_rows),
                       os.path.join(out, f"{stem}lasso.csv"))
    reports.write_text(reports.stridge_csv(result.stridge_rows),
                       os.path.join(out, f"{stem}stridge.csv"))
    reports.write_text(reports.ic_csv(result.ic_rows),
                       os.path.join(out, f"{stem}ic.csv"))
    payload = {
        "report": "pic-baseline v1",
        "target_lhs": result.target_lhs,
        "lasso": result.lasso_rows,
        "stridge": result.stridge_rows,
        "ic": result.ic_rows,
        "config": cfg.resolved(),
        "config_hash": cfg.hash(),
    }
    if result.noise_stats is not None:
        mse, mae, e_noise = result.noise_stats
        payload["noise_metrics"] = {"mse": mse, "mae": mae,
                                    "e_noise_percent": e_noise}
    reports.write_json(payload, os.path.join(out, f"{stem}baseline.json"))


def _run_baseline(cfg) -> None:
    from .pipeline import baselines_from, prepare

    prep = prepare(cfg)
    result = baselines_from(prep, cfg)
    _write_baseline_artifacts(cfg, result)
    from . import reports

    reports.write_json({"timings_s": result.timings},
                       os.path.join(cfg.output_dir, "timings.json"))


def _run_compare(cfg) -> None:
    from . import reports
    from .pipeline import baselines_from, discover_from, ic_rank_library, prepare

    prep = prepare(cfg)
    disc = discover_from(prep, cfg)
    base = baselines_from(prep, cfg)
    _write_discover_artifacts(cfg, disc)
    _write_baseline_artifacts(cfg, base)
    d = disc.discovered
    lib = disc.libraries[d.lhs]
    aic_rows = ic_rank_library(lib, prep.jet, "AIC")
    bic_rows = ic_rank_library(lib, prep.jet, "BIC")
    from .terms import term_name

    payload = {
        "report": "pic-compare v1",
        "pic_equation": d.equation,
        "pic_terms": [term_name(t) for t in d.terms],
        "library": lib.names(),
        "aic_ranking": aic_rows,
        "bic_ranking": bic_rows,
        "config": cfg.resolved(),
        "config_hash": cfg.hash(),
    }
    reports.write_json(payload, os.path.join(cfg.output_dir, "compare.json"))
    reports.write_text(
        reports.compare_text(d, aic_rows, bic_rows,
                             base.lasso_rows, base.stridge_rows),
        os.path.join(cfg.output_dir, "compare.txt"),
    )
    reports.write_json({"timings_s": {**disc.timings, **base.timings}},
                       os.path.join(cfg.output_dir, "timings.json"))


if __name__ == "__main__":
    sys.exit(main())
