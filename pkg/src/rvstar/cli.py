"""Command-line experiment runner.

``rvstar run exp.toml`` executes the configured tasks in order and writes
their artifacts plus a ``report.json``; ``rvstar verify <suite>`` runs a
verification battery; ``rvstar ingest data.csv --space '{...}'`` reads an
external series and prints a summary.

Exit codes: 0 success, 1 verification failure, 2 configuration or IO error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .errors import ConfigError, ParseError, RVStarError, ShapeMismatch, TaskError, UnknownSuite
from .estimate import ThresholdRule, compare_spectral, default_summaries, empirical_spectral, extremogram, hill
from .models import ModelSpec, model_from_config, simulate, true_forward_spectral
from .series import SeriesPath, ingest
from .spectral import nu_k_integral, parse_function, time_change_residual
from .starspace import space_from_config, validate_axioms
from .tailmeasure import build_tail_measure, lag_exceedance_counts, polar_product_check, tail_ratio_curve
from .verify import SCALES, SUITES, run_suites

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

OUTPUT_ENV = "RVSTAR_OUTPUT_DIR"
TASKS = ("simulate", "hill", "spectral", "extremogram", "tailmeasure", "verify_timechange", "verify_nuk",
         "validate_space")
NEEDS_SERIES = {"hill", "spectral", "extremogram", "tailmeasure"}
NEEDS_MODEL = {"simulate", "verify_timechange", "verify_nuk"}

TASK_DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {},
    "hill": {"k": None},
    "spectral": {"m": 2, "compare": True, "oracle_alpha": False, "n_law": 100_000},
    "extremogram": {"lags": [0, 1, 2, 3, 4, 5]},
    "tailmeasure": {"m": 1, "lambdas": [1.0, 1.5, 2.0, 4.0], "modulus_bins": 5, "max_lag": 5},
    "verify_timechange": {"s": 1, "t": 0, "f": "indicator_exceed(-1, 1.0)", "n": 100_000},
    "verify_nuk": {"k": 2, "f": "product_exceed(1.0, 1.0, start=1)", "r0": 1.0, "n": 100_000},
    "validate_space": {"n_samples": 10_000, "tol": 1e-9},
}


def _line_of(text: str, section: str | None, key: str) -> int | None:
    """Line number of ``key`` inside ``[section]`` (or the section header itself)."""
    current = None
    header = re.compile(r"^\s*\[([^\]]+)\]\s*$")
    for i, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if current == section and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return i
    return None


def _parse_value(raw: str) -> Any:
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_override(cfg: dict[str, Any], assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value", field="--set")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {key!r}: {p!r} is not a table", field=key)
    node[parts[-1]] = _parse_value(raw.strip())


@dataclass
class Experiment:
    """A validated configuration, ready to run."""

    raw: dict[str, Any]
    text: str
    n: int
    seed: int
    burn_in: int | None
    tasks: list[str]
    output_dir: Path
    threshold: ThresholdRule
    model: ModelSpec | None
    space: Any
    input_path: Path | None
    params: dict[str, dict[str, Any]]
    config_hash: str


def _field_error(text: str, message: str, section: str, key: str) -> ConfigError:
    return ConfigError(message, field=f"{section}.{key}", line=_line_of(text, section, key))


def _lookup(cfg, text, kind: str, ref_key: str):
    """Resolve ``run.<ref_key>`` against ``[<kind>s.NAME]`` or fall back to ``[<kind>]``."""
    run = cfg.get("run", {})
    if ref_key in run:
        name = run[ref_key]
        table = cfg.get(kind + "s", {})
        if not isinstance(name, str) or name not in table:
            raise _field_error(text, f"{kind} {name!r} is not defined (known: {sorted(table)})", "run", ref_key)
        return table[name], f"{kind}s.{name}"
    if kind in cfg:
        return cfg[kind], kind
    return None, kind


def load_experiment(path: str | Path, overrides=(), output_dir: str | None = None) -> Experiment:
    """Parse and validate a TOML experiment before any work starts.

    Raises
    ------
    ConfigError
        With the offending field and, where known, its line.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        line = int(m.group(1)) if m else max(1, len(text.splitlines()))
        raise ConfigError(f"syntax error: {exc}", line=line) from None
    for item in overrides:
        apply_override(cfg, item)

    run = cfg.get("run")
    if not isinstance(run, dict):
        raise ConfigError("missing [run] table", field="run")
    unknown = set(run) - {"n", "seed", "burn_in", "tasks", "output_dir", "threshold", "model", "space", "input"}
    if unknown:
        raise _field_error(text, f"unknown key(s) {sorted(unknown)}", "run", sorted(unknown)[0])

    tasks = run.get("tasks", [])
    if not isinstance(tasks, list) or not tasks:
        raise _field_error(text, "tasks must be a nonempty list", "run", "tasks")
    for t in tasks:
        if t not in TASKS:
            raise _field_error(text, f"unknown task {t!r}; expected one of {list(TASKS)}", "run", "tasks")

    n = run.get("n", 10_000)
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise _field_error(text, f"n must be a positive integer, got {n!r}", "run", "n")
    seed = run.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise _field_error(text, f"seed must be a nonnegative integer, got {seed!r}", "run", "seed")
    burn_in = run.get("burn_in")
    if burn_in is not None and (not isinstance(burn_in, int) or burn_in < 0):
        raise _field_error(text, "burn_in must be a nonnegative integer", "run", "burn_in")
    try:
        threshold = ThresholdRule.from_config(run.get("threshold"))
    except (RVStarError, TypeError) as exc:
        raise _field_error(text, str(exc), "run", "threshold") from None

    space_block, space_where = _lookup(cfg, text, "space", "space")
    model_block, model_where = _lookup(cfg, text, "model", "model")
    space = None
    if space_block is not None:
        try:
            space = space_from_config(space_block)
        except RVStarError as exc:
            raise ConfigError(str(exc), field=space_where, line=_line_of(text, space_where, None)) from None
    model = None
    if model_block is not None:
        try:
            model = model_from_config(model_block, space)
        except RVStarError as exc:
            raise ConfigError(str(exc), field=model_where, line=_line_of(text, model_where, None)) from None
        space = model.space

    input_path = Path(run["input"]) if "input" in run else None
    if input_path is not None and not input_path.is_absolute():
        input_path = Path(path).parent / input_path
    needs_model = [t for t in tasks if t in NEEDS_MODEL]
    if needs_model and model is None:
        raise ConfigError(f"task(s) {needs_model} need a model block", field="run.model",
                          line=_line_of(text, "run", "tasks"))
    if any(t in NEEDS_SERIES for t in tasks) and "simulate" not in tasks and input_path is None:
        raise _field_error(text, "estimation tasks need 'simulate' or run.input", "run", "tasks")
    if input_path is not None and space is None:
        raise ConfigError("run.input needs a space block", field="space")
    if "validate_space" in tasks and space is None:
        raise ConfigError("validate_space needs a space block", field="space")

    params: dict[str, dict[str, Any]] = {}
    task_cfg = cfg.get("task", {})
    for t in tasks:
        given = task_cfg.get(t, {})
        extra = set(given) - set(TASK_DEFAULTS[t])
        if extra:
            raise _field_error(text, f"unknown parameter(s) {sorted(extra)}", f"task.{t}", sorted(extra)[0])
        params[t] = {**TASK_DEFAULTS[t], **given}
        for key in ("f",):
            if key in params[t]:
                try:
                    parse_function(params[t][key])
                except RVStarError as exc:
                    raise _field_error(text, str(exc), f"task.{t}", key) from None

    out = output_dir or run.get("output_dir") or os.environ.get(OUTPUT_ENV) or "rvstar-output"
    canonical = json.dumps(cfg, sort_keys=True, default=str)
    return Experiment(cfg, text, n, seed, burn_in, list(tasks), Path(out), threshold, model, space,
                      input_path, params, hashlib.sha256(canonical.encode()).hexdigest())


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    config_hash: str
    seed: dict[str, Any]
    version: str
    tasks: list[dict[str, Any]] = field(default_factory=list)
    wall_time: float = 0.0
    status: str = "ok"

    def to_dict(self) -> dict[str, Any]:
        return {"status": self.status, "config_hash": self.config_hash, "seed": self.seed,
                "version": self.version, "wall_time": self.wall_time, "tasks": self.tasks}


def _dump(path: Path, obj: Any) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


class _Runner:
    def __init__(self, exp: Experiment):
        self.exp = exp
        self.path: SeriesPath | None = None
        self.out = exp.output_dir

    def series(self) -> SeriesPath:
        if self.path is None:
            self.path = ingest(self.exp.input_path, self.exp.space)
        return self.path

    def simulate(self, p):
        self.path = simulate(self.exp.model, self.exp.n, self.exp.seed, self.exp.burn_in)
        target = self.out / "series.csv"
        self.path.to_csv(target)
        return [target], {"n": len(self.path), "burn_in": self.path.burn_in}

    def hill(self, p):
        rho = self.series().moduli()
        k = p["k"] if p["k"] is not None else math.ceil(rho.size ** 0.7)
        est = hill(rho, k)
        target = self.out / "hill.json"
        _dump(target, est.to_dict())
        return [target], est.to_dict()

    def spectral(self, p):
        emp = empirical_spectral(self.series(), p["m"], self.exp.threshold)
        draws = self.out / "spectral_draws.csv"
        emp.to_csv(draws)
        result: dict[str, Any] = emp.summary()
        if p["compare"] and self.exp.model is not None:
            law = true_forward_spectral(self.exp.model)
            rep = compare_spectral(emp, law, default_summaries(p["m"]), oracle_alpha=p["oracle_alpha"],
                                   n_law=p["n_law"], seed=self.exp.seed)
            result["comparison"] = rep.to_dict()
        target = self.out / "spectral.json"
        _dump(target, result)
        return [draws, target], {k: v for k, v in result.items() if k != "comparison"}

    def extremogram(self, p):
        curve = extremogram(self.series(), p["lags"], self.exp.threshold)
        csv_target, json_target = self.out / "extremogram.csv", self.out / "extremogram.json"
        curve.to_csv(csv_target)
        _dump(json_target, {"u": curve.u, "n_exceed": curve.n_exceed, "rows": curve.rows()})
        return [csv_target, json_target], {"n_exceed": curve.n_exceed}

    def tailmeasure(self, p):
        path = self.series()
        tm = build_tail_measure(path, p["m"], self.exp.threshold)
        atoms, side = self.out / "tailmeasure_atoms.csv", self.out / "tailmeasure.json"
        tm.export(atoms, side)
        curve = tail_ratio_curve(path, p["lambdas"], self.exp.threshold)
        ratio = self.out / "tail_ratio.csv"
        curve.to_csv(ratio)
        polar = polar_product_check(path, self.exp.threshold, p["modulus_bins"], seed=self.exp.seed)
        lags = lag_exceedance_counts(path, p["max_lag"], self.exp.threshold)
        diag = self.out / "tailmeasure_checks.json"
        _dump(diag, {"polar": polar.to_dict(), "tail_ratio_alpha": curve.alpha_slope, "notes": curve.notes,
                     "lag_exceedance_counts": lags})
        return [atoms, side, ratio, diag], {"atoms": tm.atoms.n, "normalizer": tm.normalizer}

    def verify_timechange(self, p):
        law = true_forward_spectral(self.exp.model)
        r = time_change_residual(law, parse_function(p["f"]), p["s"], p["t"], p["n"], self.exp.seed)
        target = self.out / "verify_timechange.json"
        _dump(target, {"f": p["f"], "s": p["s"], "t": p["t"], **r.to_dict()})
        return [target], {"z_score": r.z_score}

    def verify_nuk(self, p):
        law = true_forward_spectral(self.exp.model)
        est = nu_k_integral(law, parse_function(p["f"]), p["k"], p["r0"], p["n"], self.exp.seed)
        target = self.out / "verify_nuk.json"
        _dump(target, {"f": p["f"], "k": p["k"], "r0": p["r0"], **est.to_dict()})
        return [target], est.to_dict()

    def validate_space(self, p):
        rep = validate_axioms(self.exp.space, n_samples=p["n_samples"], tol=p["tol"], seed=self.exp.seed)
        target = self.out / "validate_space.json"
        _dump(target, rep.to_dict())
        return [target], {"passed": rep.passed}


def run(config: str | Path, overrides=(), output_dir: str | None = None) -> RunReport:
    """Run every task of ``config`` in order, stopping at the first failure.

    Raises
    ------
    ConfigError
        Before any work, if the configuration is invalid.
    TaskError
        After writing a partial report, if a task fails.
    """
    t0 = time.perf_counter()
    exp = load_experiment(config, overrides, output_dir)
    try:
        exp.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}", field="run.output_dir") from None
    report = RunReport(exp.config_hash, {"seed": exp.seed, "streams": ["model/amplitude", "model/angle"]},
                       __version__)
    runner = _Runner(exp)
    failure = None
    for task in exp.tasks:
        t_task = time.perf_counter()
        try:
            files, summary = getattr(runner, task)(exp.params[task])
        except (RVStarError, OSError, ValueError) as exc:
            report.tasks.append({"task": task, "status": "failed", "error": str(exc)})
            report.status = "failed"
            failure = TaskError(task, exc)
            break
        report.tasks.append({"task": task, "status": "ok", "outputs": [str(f) for f in files],
                             "summary": summary, "seconds": time.perf_counter() - t_task})
    for task in exp.tasks[len(report.tasks):]:
        report.tasks.append({"task": task, "status": "skipped"})
    report.wall_time = time.perf_counter() - t0
    _dump(exp.output_dir / "report.json", report.to_dict())
    if failure is not None:
        raise failure
    return report


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rvstar", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"rvstar {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the tasks of an experiment config")
    r.add_argument("config")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. run.n=1000")
    r.add_argument("--output-dir", help=f"artifact directory (default: run.output_dir, ${OUTPUT_ENV})")

    v = sub.add_parser("verify", help="run a verification battery")
    v.add_argument("suite", help=f"one of {', '.join(SUITES)} or all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--scale", choices=sorted(SCALES), default="desk")

    i = sub.add_parser("ingest", help="read a CSV series and summarize it")
    i.add_argument("csv")
    i.add_argument("--space", help='inline space table, e.g. \'{ kind = "euclidean", dim = 2 }\'')
    i.add_argument("--out", help="write the parsed series back out as CSV")
    return ap


def _space_arg(text: str | None):
    if text is None:
        return None
    try:
        return space_from_config(tomllib.loads(f"space = {text}")["space"])
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad --space table: {exc}", field="--space") from None


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            report = run(args.config, args.overrides, args.output_dir)
            print(json.dumps(report.to_dict(), indent=2, default=_json_default))
            return 0
        if args.command == "verify":
            results = run_suites(args.suite, args.seed, args.scale)
            summary = {"pass": all(r.passed for r in results), "suites": [r.to_dict() for r in results]}
            print(json.dumps(summary, indent=2, default=_json_default))
            return 0 if summary["pass"] else 1
        path = ingest(args.csv, _space_arg(args.space))
        if args.out:
            path.to_csv(args.out)
        rho = path.moduli()
        print(json.dumps({"n": len(path), "space": path.space.descriptor(),
                          "modulus_min": float(rho.min()), "modulus_max": float(rho.max())}, indent=2))
        return 0
    except UnknownSuite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ParseError, ShapeMismatch, RVStarError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
