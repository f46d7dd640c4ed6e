"""Command-line interface.

Exit status: 0 success, 1 identifiability failure, 2 input/parse error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .em import SolverConfig, run_em
from .errors import IdentifiabilityError, NumericalFailure
from .identifiability import check_rank, check_structural
from .model import Dataset, NoiseModel, SolveResult, dataset_from_records, dataset_to_records, validate
from .simulate import ScenarioRow, ScenarioSpec, run_scenario

log = logging.getLogger(__name__)

EXIT_OK, EXIT_IDENT, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

BENCHMARK_COLUMNS = ["scenario", "level", "runs", "median_fit_g", "median_fit_w",
                     "median_fit_v", "median_fit_g_naive", "non_identifiable"]


class InputError(Exception):
    """Malformed user input; maps to exit status 2."""


# --------------------------------------------------------------------- io

def _fmt(x) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def parse_data_csv(text: str) -> Dataset:
    """Parse a ``t,u,y`` table; empty cells are missing samples."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("line 1: empty data file") from None
    if [h.strip().lstrip("﻿") for h in header] != ["t", "u", "y"]:
        raise InputError(f"line 1: expected header 't,u,y', got {','.join(header)!r}")
    records = []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise InputError(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            t = int(row[0])
            u = float(row[1]) if row[1].strip() else None
            y = float(row[2]) if row[2].strip() else None
        except ValueError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
        if (u is not None and not math.isfinite(u)) or (y is not None and not math.isfinite(y)):
            raise InputError(f"line {lineno}: non-finite value")
        records.append((t, u, y))
    N = len(records)
    if sorted(r[0] for r in records) != list(range(1, N + 1)):
        raise InputError(f"time column must enumerate 1..{N} exactly once")
    return dataset_from_records(records, N)


def read_data(path) -> Dataset:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return parse_data_csv(text)


def format_data_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "u", "y"])
    for t, u, y in dataset_to_records(dataset):
        w.writerow([t, _fmt(u), _fmt(y)])
    return buf.getvalue()


def _load_json(path) -> object:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def load_run_config(path) -> tuple[float, SolverConfig]:
    """Read ``gamma`` and the solver options from a JSON document."""
    cfg = _load_json(path)
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    if cfg.get("gamma") is None:
        raise InputError("gamma required")
    try:
        gamma = float(cfg["gamma"])
    except (TypeError, ValueError):
        raise InputError("gamma must be a number") from None
    if not gamma > 0:
        raise InputError("gamma must be positive")
    if "n" not in cfg:
        raise InputError("n required")
    known = {f.name for f in fields(SolverConfig)} - {"fixed_input_mode"}
    unknown = set(cfg) - known - {"gamma", "seed"}
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        solver = SolverConfig(**{k: v for k, v in cfg.items() if k in known})
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid config: {exc}") from None
    return gamma, solver


def result_document(result: SolveResult, dataset: Dataset, warnings: list[str]) -> dict:
    st = result.final_state
    return {
        "g_hat": result.g_hat.tolist(),
        "w_hat": result.w_hat.tolist(),
        "v_hat": result.v_hat.tolist(),
        "lam": st.hyper.lam,
        "beta": st.hyper.beta,
        "sigma_y2": st.noise.sigma_y2,
        "sigma_u2": st.noise.sigma_u2,
        "gamma": st.noise.gamma,
        "converged": result.converged,
        "iterations": result.iterations,
        "loglik_history": list(st.loglik_history),
        "posterior_cov": result.posterior_cov.tolist(),
        "N": dataset.N,
        "N_u": dataset.N_u,
        "N_y": dataset.N_y,
        "warnings": warnings,
    }


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------- commands

def _solve(args) -> tuple[Dataset, SolveResult, list[str]]:
    dataset = read_data(args.data)
    gamma, cfg = load_run_config(args.config)
    warnings = validate(dataset, cfg.n)
    for w in warnings:
        log.warning(w)
    return dataset, run_em(dataset, gamma, cfg), warnings


def cmd_identify(args) -> int:
    dataset, result, warnings = _solve(args)
    _write(args.out, _dump(result_document(result, dataset, warnings)))
    return EXIT_OK


def cmd_smooth(args) -> int:
    dataset, result, warnings = _solve(args)
    u_obs = set(dataset.input_sel.times)
    y_obs = set(dataset.output_sel.times)
    records = dataset_to_records(dataset)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "u", "y", "w_hat", "v_hat", "u_status", "y_status"])
    for (t, u, y), wh, vh in zip(records, result.w_hat, result.v_hat):
        w.writerow([t, _fmt(u), _fmt(y), _fmt(wh), _fmt(vh),
                    "observed" if t in u_obs else "missing",
                    "observed" if t in y_obs else "missing"])
    out = Path(args.out)
    _write(out, buf.getvalue())
    _write(out.with_suffix(".json"), _dump(result_document(result, dataset, warnings)))
    return EXIT_OK


def _load_taps(path) -> np.ndarray:
    doc = _load_json(path)
    if isinstance(doc, dict):
        doc = doc.get("g", doc.get("g_hat"))
    try:
        g = np.asarray(doc, dtype=float).ravel()
    except (TypeError, ValueError):
        g = np.empty(0)
    if g.size == 0 or not np.all(np.isfinite(g)):
        raise InputError(f"{path}: expected a list of taps or an object with 'g'")
    return g


def cmd_check(args) -> int:
    dataset = read_data(args.data)
    if args.g is not None:
        g = _load_taps(args.g)
        support = [k for k, gk in enumerate(g) if gk != 0.0]
        report = check_structural(dataset, support)
        noise = NoiseModel(args.gamma, args.gamma, 1.0)
        report = report.merge(check_rank(g, dataset, noise))
    else:
        report = check_structural(dataset, args.n)
    doc = report.to_dict()
    if doc["condition_estimate"] is not None and not math.isfinite(doc["condition_estimate"]):
        doc["condition_estimate"] = None
    sys.stdout.write(_dump(doc))
    return EXIT_OK if report.ok else EXIT_IDENT


def load_scenario_specs(path) -> list[ScenarioSpec]:
    doc = _load_json(path)
    items = doc if isinstance(doc, list) else [doc]
    specs = []
    for item in items:
        if not isinstance(item, dict):
            raise InputError("scenario spec must be an object or a list of objects")
        try:
            if "levels" in item:
                item = {**item, "levels": tuple(item["levels"])}
            specs.append(ScenarioSpec(**item))
        except (TypeError, ValueError) as exc:
            raise InputError(f"invalid scenario spec: {exc}") from None
    return specs


def format_benchmark_csv(rows: Sequence[ScenarioRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCHMARK_COLUMNS)
    for r in rows:
        w.writerow([r.scenario, _fmt(r.level), r.runs, _fmt(r.median_fit_g),
                    _fmt(r.median_fit_w), _fmt(r.median_fit_v),
                    _fmt(r.median_fit_g_naive), r.non_identifiable])
    return buf.getvalue()


def cmd_benchmark(args) -> int:
    specs = load_scenario_specs(args.spec)
    jobs = args.jobs or os.cpu_count() or 1
    rows: list[ScenarioRow] = []
    for spec in specs:
        log.info("running scenario %s (%d levels x %d runs)",
                 spec.scenario, len(spec.levels), spec.runs)
        rows.extend(run_scenario(spec, jobs=jobs))
    out = Path(args.out)
    _write(out, format_benchmark_csv(rows))
    summary = {
        "specs": [{**asdict(s), "levels": list(s.levels)} for s in specs],
        "rows": [{k: (None if isinstance(v, float) and math.isnan(v) else v)
                  for k, v in asdict(r).items()} for r in rows],
    }
    _write(out.with_suffix(".json"), _dump(summary))
    return EXIT_OK


# ------------------------------------------------------------------ entry

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kernel-eiv", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    for name, func, helptext in (
            ("identify", cmd_identify, "estimate the impulse response"),
            ("smooth", cmd_smooth, "reconstruct the noiseless input and output")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--data", required=True)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True)
        sp.set_defaults(func=func)

    sp = sub.add_parser("check", help="identifiability of the missing-data pattern")
    sp.add_argument("--data", required=True)
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--n", type=int)
    group.add_argument("--g")
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("benchmark", help="Monte Carlo scenario sweep")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=None)
    sp.set_defaults(func=cmd_benchmark)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IdentifiabilityError as exc:
        doc = {"error": str(exc), "null_dim": exc.null_dim,
               "identifiability": exc.report.to_dict() if exc.report else None}
        print(_dump(doc), file=sys.stderr, end="")
        if getattr(args, "out", None):
            _write(args.out, _dump(doc))
        return EXIT_IDENT
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
