"""Deterministic report rendering: JSON, CSV and plain-text artifacts.

Reports embed the resolved configuration and its hash. Wall-clock timings
go to a separate sidecar file so the main artifacts are byte-stable
across reruns and worker counts.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .selection import DiscoveredPde, ScoredCombination
from .terms import term_name


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def score_rows(table: list[ScoredCombination]) -> list[dict]:
    rows = []
    for s in table:
        rows.append({
            "lhs": s.combination.lhs,
            "mask": s.combination.mask,
            "terms": s.combination.term_names(),
            "r_loss": s.r_loss,
            "p_loss": s.p_loss,
            "pic": s.pic,
            "pinn_diverged": s.pinn_diverged,
            "coefficients": [float(c) for c in s.combination.xi],
        })
    return rows


def discovered_json(d: DiscoveredPde, resolved_config: dict, config_hash: str) -> dict:
    return {
        "report": "pic-discover v1",
        "equation": d.equation,
        "lhs": d.lhs,
        "terms": [term_name(t) for t in d.terms],
        "term_genes": [list(t) for t in d.terms],
        "coefficients": [float(c) for c in d.coefficients],
        "score_table": score_rows(d.score_table),
        "provenance": _jsonable(d.provenance),
        "config": resolved_config,
        "config_hash": config_hash,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def scores_csv(table: list[ScoredCombination]) -> str:
    lines = ["lhs,mask,terms,r_loss,p_loss,pic,coefficients"]
    for s in table:
        terms = "+".join(s.combination.term_names())
        p = "" if s.p_loss is None else _fmt(s.p_loss)
        pic = "" if s.pic is None else _fmt(s.pic)
        coeffs = ";".join(_fmt(c) for c in s.combination.xi)
        lines.append(f"{s.combination.lhs},{s.combination.mask},{terms},"
                     f"{_fmt(s.r_loss)},{p},{pic},{coeffs}")
    return "\n".join(lines) + "\n"


def discovered_text(d: DiscoveredPde, config_hash: str) -> str:
    lines = [
        "pic-report v1",
        "",
        f"discovered: {d.equation}",
        "",
        "scored combinations (PIC = r_loss * p_loss):",
    ]
    ranked = sorted(
        (s for s in d.score_table if s.pic is not None),
        key=lambda s: (s.pic, s.combination.lhs, s.combination.mask),
    )
    for s in ranked:
        terms = " + ".join(s.combination.term_names())
        lines.append(f"  {s.combination.lhs:4s} | {terms:40s} | "
                     f"r={s.r_loss:.4g} p={s.p_loss:.4g} pic={s.pic:.4g}")
    n_unscored = sum(1 for s in d.score_table if s.pic is None)
    lines.append(f"  ({n_unscored} combinations ranked by r-loss only)")
    lines.append("")
    lines.append(f"config_hash: {config_hash}")
    lines.append(f"master_seed: {d.provenance.get('master_seed')}")
    return "\n".join(lines) + "\n"


def ga_trace_jsonl(traces: dict) -> str:
    lines = []
    for lhs in sorted(traces):
        for rec in traces[lhs]:
            lines.append(json.dumps({"lhs": lhs, **rec}, sort_keys=True))
    return "\n".join(lines) + "\n"


def lasso_csv(rows: list[dict]) -> str:
    lines = ["alpha,support,converged,intercept,coefficients"]
    for r in rows:
        lines.append(
            f"{_fmt(r['alpha'])},{'+'.join(r['support'])},{int(r['converged'])},"
            f"{_fmt(r['intercept'])},{';'.join(_fmt(c) for c in r['coefficients'])}"
        )
    return "\n".join(lines) + "\n"


def stridge_csv(rows: list[dict]) -> str:
    lines = ["l0_penalty,threshold,support,coefficients"]
    for r in rows:
        lines.append(
            f"{_fmt(r['l0_penalty'])},{_fmt(r['threshold'])},"
            f"{'+'.join(r['support'])},{';'.join(_fmt(c) for c in r['coefficients'])}"
        )
    return "\n".join(lines) + "\n"


def ic_csv(rows: list[dict]) -> str:
    lines = ["terms,aic,bic"]
    for r in rows:
        lines.append(f"{'+'.join(r['terms'])},{_fmt(r['aic'])},{_fmt(r['bic'])}")
    return "\n".join(lines) + "\n"


def compare_text(discovered: DiscoveredPde, aic_rows, bic_rows,
                 lasso_rows, stridge_rows) -> str:
    lines = ["pic-compare v1", "", f"PIC pick:     {discovered.equation}", ""]
    lines.append("AIC top-3 (library combinations):")
    for r in aic_rows[:3]:
        lines.append(f"  {' + '.join(r['terms']):40s} score={r['score']:.6g}")
    lines.append("BIC top-3 (library combinations):")
    for r in bic_rows[:3]:
        lines.append(f"  {' + '.join(r['terms']):40s} score={r['score']:.6g}")
    lines.append("Lasso sweep supports:")
    for r in lasso_rows:
        lines.append(f"  alpha={r['alpha']:<8g} -> {' + '.join(r['support']) or '(empty)'}")
    lines.append("STRidge sweep supports:")
    for r in stridge_rows:
        lines.append(f"  penalty={r['l0_penalty']:<8g} -> {' + '.join(r['support']) or '(empty)'}")
    return "\n".join(lines) + "\n"


def write_text(content: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
