"""``siglasso`` command-line front end.

Every subcommand reads an optional YAML or JSON config, lets a few flags
override it, writes its outputs atomically into ``--out-dir`` and records a
``<command>_manifest.json`` next to them. Passing a manifest back through
``--config`` replays the run with the same resolved settings.

Errors are reported as one JSON object on stderr with a nonzero exit code:
2 for invalid input or config, 1 for failures during computation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from pathlib import Path as FsPath

import numpy as np
import yaml

from . import __version__
from ._io import SCHEMA_VERSION, atomic_write, dumps, fmt, rows_to_csv
from .experiments import AXES, DEFAULT_KAPPA_GRID, STRUCTURAL_DEFAULTS, ExperimentConfig, consistency_rate, oos_mse, sweep
from .irrep import (
    derive_general_params,
    equicorrelation_threshold,
    finite_sample_general_bounds,
    finite_sample_ito_bounds,
    irrepresentable,
    sufficient_bound,
    uniqueness_bound,
)
from .moments import ito_bm_moments, mc_signature_moments, strat_bm_moments
from .processes import KINDS, CorrelationSpec, ProcessSpec, SeededStream, simulate_paths
from .signature import CONVENTIONS, augment_batch, signature_batch
from .words import enumerate_words, parse_word, word_label

THREADS_ENV = "SIGLASSO_THREADS"


class ConfigError(ValueError):
    """Config or input that fails validation; carries a field path."""


# ---------------------------------------------------------------- schema


class _Opt:
    def __init__(self, kind, default=None, choices=None):
        self.kind = kind
        self.default = default
        self.choices = choices


def _check(value, opt: _Opt, where: str):
    k = opt.kind
    if value is None:
        return None
    if k == "int":
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)) and not (isinstance(value, float) and value.is_integer()):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        value = int(value)
    elif k == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        value = float(value)
    elif k == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
    elif k == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
    elif k in ("list", "floats", "strs"):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        item = {"floats": _Opt("float"), "strs": _Opt("str")}.get(k)
        if item is not None:
            value = [_check(v, item, f"{where}[{i}]") for i, v in enumerate(value)]
        else:
            value = list(value)
    elif k == "dict":
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping, got {value!r}")
    if opt.choices is not None:
        vals = value if isinstance(value, list) else [value]
        for i, v in enumerate(vals):
            if v not in opt.choices:
                path = where if not isinstance(value, list) else f"{where}[{i}]"
                raise ConfigError(f"{path}: {v!r} is not one of {list(opt.choices)}")
    return value


def resolve(schema: dict, raw: dict | None) -> dict:
    """Fill defaults and type-check ``raw`` against ``schema``."""
    raw = dict(raw or {})
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"config.{unknown[0]}: unknown field (allowed: {', '.join(sorted(schema))})")
    return {key: _check(raw.get(key, opt.default), opt, f"config.{key}") for key, opt in schema.items()}


_EXPERIMENT = {
    "process": _Opt("str", "brownian", ("brownian", "ou", "ar1", "arima", "random_walk")),
    "d": _Opt("int", 2),
    "rho": _Opt("float", 0.0),
    "kappa": _Opt("float", 0.0),
    "phi": _Opt("float", 0.0),
    "arima": _Opt("list", [0, 1, 0]),
    "mixing": _Opt("str", "fixed", ("fixed", "wishart")),
    "conventions": _Opt("strs", ["ito", "stratonovich"], CONVENTIONS),
    "K": _Opt("int", 4),
    "q": _Opt("int", 3),
    "n_samples": _Opt("int", 100),
    "n_test": _Opt("int", 100),
    "noise": _Opt("float", 0.01),
    "reps": _Opt("int", 200),
    "n_steps": _Opt("int", 100),
    "T": _Opt("float", 1.0),
    "augment_time": _Opt("bool", False),
    "batches": _Opt("int", 10),
    "cv_folds": _Opt("int", 5),
}

_CORR = {
    "process": _Opt("str", "brownian", ("brownian", "bm", "ou")),
    "convention": _Opt("str", "ito", CONVENTIONS),
    "method": _Opt("str", "analytic", ("analytic", "mc")),
    "d": _Opt("int", 2),
    "rho": _Opt("float", 0.0),
    "kappa": _Opt("float", 1.0),
    "K": _Opt("int", 4),
    "T": _Opt("float", 1.0),
    "trials": _Opt("int", 100_000),
    "n_steps": _Opt("int", 100),
}

SCHEMAS = {
    "signature": {
        "input": _Opt("str"),
        "convention": _Opt("str", "ito", CONVENTIONS),
        "K": _Opt("int", 4),
        "augment": _Opt("bool", False),
    },
    "simulate": {
        "process": _Opt("str", "brownian", KINDS),
        "d": _Opt("int", 1),
        "rho": _Opt("float", 0.0),
        "sigma": _Opt("floats", None),
        "T": _Opt("float", 1.0),
        "n_steps": _Opt("int", 100),
        "n_paths": _Opt("int", 1),
        "params": _Opt("dict", {}),
    },
    "corr": _CORR,
    "irrep": {**_CORR, "active": _Opt("strs", []), "signs": _Opt("floats", [])},
    "bounds": {
        "q_max": _Opt("int", 3),
        "a_values": _Opt("list", [2, 3, 5]),
        "ito": _Opt("dict", None),
        "general": _Opt("dict", None),
    },
    "uniqueness": {
        "process": _Opt("str", "brownian", ("brownian", "ou")),
        "convention": _Opt("str", "ito", CONVENTIONS),
        "d": _Opt("int", 2),
        "rho": _Opt("float", 0.0),
        "kappa": _Opt("float", 1.0),
        "K": _Opt("int", 2),
        "T": _Opt("float", 1.0),
        "n_steps": _Opt("int", 100),
        "trials": _Opt("int", 20_000),
        "a": _Opt("floats", None),
        "b": _Opt("floats", None),
        "theta": _Opt("float", 2.0),
        "eta": _Opt("float", 0.1),
    },
    "consistency": _EXPERIMENT,
    "mse": _EXPERIMENT,
    "sweep": {**_EXPERIMENT, "axis": _Opt("str", "kappa", AXES), "grid": _Opt("list", None), "metric": _Opt("str", "rate", ("rate", "mse"))},
    "payoff": {
        "experiment": _Opt("str", "learning", ("learning", "conventions")),
        "payoffs": _Opt("list", None),
        "predictors": _Opt("strs", ["sig", "rsam", "usam"], ("sig", "rsam", "usam")),
        "convention": _Opt("str", "stratonovich", CONVENTIONS),
        "K": _Opt("int", 6),
        "ratios": _Opt("floats", None),
        "n_train": _Opt("int", 200),
        "n_test": _Opt("int", 100),
        "reps": _Opt("int", 200),
        "steps": _Opt("int", 1000),
        "vol": _Opt("float", 0.01),
        "rho": _Opt("float", 0.6),
        "kappa": _Opt("float", 1.0),
        "batches": _Opt("int", 10),
        "augment_time": _Opt("bool", False),
    },
    "price": {
        "book": _Opt("str", "stock", ("stock", "rate")),
        "conventions": _Opt("strs", ["ito", "stratonovich"], CONVENTIONS),
        "n_paths": _Opt("int", 1000),
        "dt": _Opt("float", 1.0 / 252.0),
        "K": _Opt("int", 4),
        "cv_folds": _Opt("int", 5),
        "augment_time": _Opt("bool", False),
        "reps": _Opt("int", 20),
        "batches": _Opt("int", 5),
        "sources": _Opt("list", None),
        "targets": _Opt("list", None),
        "model": _Opt("dict", {}),
    },
}

SWEEP_GRIDS = {
    **STRUCTURAL_DEFAULTS,
    "kappa": DEFAULT_KAPPA_GRID,
    "rho": (0.0, 0.3, 0.6, 0.9),
    "q": (1, 2, 3, 4, 5, 6),
    "K": (2, 3, 4, 5),
    "one_minus_phi": (1.0, 0.5, 0.1, 0.01),
    "integrate": (0, 1, 2),
    "noise": (0.01, 0.1, 1.0),
}

HAS_REPS = {"consistency", "mse", "sweep", "payoff", "price"}


# ---------------------------------------------------------------- helpers


class Run:
    """Output collector for one command invocation."""

    def __init__(self, command: str, out_dir: FsPath, fmt_: str):
        self.command = command
        self.out_dir = out_dir
        self.format = fmt_
        self.outputs: list[dict] = []

    def write(self, name: str, text: str):
        path = atomic_write(self.out_dir / name, text)
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        self.outputs.append({"file": path.name, "sha256": digest})

    def table(self, stem: str, rows: list[dict], columns: list[str] | None = None):
        if self.format == "json":
            self.write(f"{stem}.json", dumps({"schema_version": SCHEMA_VERSION, "rows": rows}))
        else:
            self.write(f"{stem}.csv", rows_to_csv(rows, columns))

    def document(self, stem: str, obj):
        self.write(f"{stem}.json", dumps({"schema_version": SCHEMA_VERSION, **obj}))


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = FsPath(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text) if p.suffix.lower() == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    if "command" in data and "config" in data and "outputs" in data:
        data = dict(data["config"])
        data.pop("seed", None)
        data.pop("threads", None)
    return data


def read_paths_csv(path: str):
    """Parse a ``[path_id,] t, x1..xd`` file into a list of (id, times, values)."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read input {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}:1: empty file, header row required") from None
        header = [h.strip() for h in header]
        has_id = bool(header) and header[0] == "path_id"
        cols = header[1:] if has_id else header
        if len(cols) < 2 or cols[0] != "t":
            raise ConfigError(f"{path}:1: header must be '[path_id,] t, x1, ..., xd', got {','.join(header)!r}")
        d = len(cols) - 1
        groups: dict[str, list] = {}
        order: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            pid = row[0].strip() if has_id else "0"
            try:
                nums = [float(c) for c in (row[1:] if has_id else row)]
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
            if not all(math.isfinite(v) for v in nums):
                raise ConfigError(f"{path}:{lineno}: non-finite value in {row!r}")
            if pid not in groups:
                groups[pid] = []
                order.append(pid)
            groups[pid].append((lineno, nums))
    if not order:
        raise ConfigError(f"{path}: no data rows")
    out = []
    for pid in order:
        rows = groups[pid]
        arr = np.array([r[1] for r in rows])
        if arr.shape[0] < 2:
            raise ConfigError(f"{path}:{rows[0][0]}: path {pid!r} needs at least two rows")
        bad = np.flatnonzero(np.diff(arr[:, 0]) <= 0)
        if bad.size:
            raise ConfigError(f"{path}:{rows[bad[0] + 1][0]}: times must increase strictly within path {pid!r}")
        out.append((pid, arr[:, 0], arr[:, 1:]))
    return out, d


def _corr_spec(d: int, rho: float, sigma=None) -> CorrelationSpec:
    try:
        return CorrelationSpec.equicorrelated(d, rho, 1.0 if sigma is None else np.asarray(sigma, float))
    except ValueError as exc:
        raise ConfigError(f"config.rho: {exc}") from exc


def _moment_matrix(cfg: dict, seed: int, threads: int):
    corr = _corr_spec(cfg["d"], cfg["rho"])
    process = "brownian" if cfg["process"] in ("bm", "brownian") else "ou"
    if cfg["method"] == "analytic":
        if process != "brownian":
            raise ConfigError("config.method: analytic moments exist for brownian only; use method: mc")
        if cfg["convention"] == "ito":
            return ito_bm_moments(corr, cfg["K"], cfg["T"])
        if cfg["convention"] == "stratonovich":
            return strat_bm_moments(corr, cfg["K"], cfg["T"])
        raise ConfigError("config.convention: analytic moments need ito or stratonovich")
    params = {"kappa": cfg["kappa"]} if process == "ou" else {}
    spec = ProcessSpec(process, corr, cfg["T"], cfg["n_steps"], params)
    return mc_signature_moments(spec, cfg["K"], cfg["convention"], cfg["trials"], SeededStream(seed), threads=threads)


def _experiment_config(cfg: dict, seed: int, threads: int) -> ExperimentConfig:
    keys = set(_EXPERIMENT)
    kw = {k: v for k, v in cfg.items() if k in keys}
    kw["arima"] = tuple(kw["arima"])
    kw["conventions"] = tuple(kw["conventions"])
    return ExperimentConfig(**kw, seed=seed, threads=threads)


# ---------------------------------------------------------------- commands


def cmd_signature(cfg, args, run: Run):
    if not cfg["input"]:
        raise ConfigError("config.input: an input CSV is required (--input)")
    paths, d = read_paths_csv(cfg["input"])
    K = cfg["K"]
    labels = enumerate_words(d + (1 if cfg["augment"] else 0), K).labels
    rows = []
    for pid, t, x in paths:
        arr = x[None]
        if cfg["augment"]:
            arr = augment_batch(arr, t)
        s = signature_batch(arr, K, cfg["convention"])[0]
        rows.append({"path_id": pid, **dict(zip(labels, s))})
    run.table("signature", rows, ["path_id"] + labels)


def cmd_simulate(cfg, args, run: Run):
    corr = _corr_spec(cfg["d"], cfg["rho"], cfg["sigma"])
    spec = ProcessSpec(cfg["process"], corr, cfg["T"], cfg["n_steps"], cfg["params"])
    X = simulate_paths(spec, SeededStream(args.seed), cfg["n_paths"])
    t = spec.times
    rows = []
    for i in range(X.shape[0]):
        for k in range(X.shape[1]):
            rows.append({"path_id": i, "t": t[k], **{f"x{j + 1}": X[i, k, j] for j in range(X.shape[2])}})
    run.table("paths", rows)


def cmd_corr(cfg, args, run: Run):
    M = _moment_matrix(cfg, args.seed, args.threads).correlation()
    if run.format == "json":
        run.document("corr", {"words": M.indexing.labels, "matrix": M.values})
    else:
        run.write("corr.csv", M.to_csv())
        run.write("corr_long.csv", M.to_long())


def cmd_irrep(cfg, args, run: Run):
    if len(cfg["active"]) != len(cfg["signs"]):
        raise ConfigError(f"config.signs: {len(cfg['signs'])} signs for {len(cfg['active'])} active words")
    M = _moment_matrix(cfg, args.seed, args.threads).correlation()
    active = []
    for i, lab in enumerate(cfg["active"]):
        try:
            w = parse_word(lab)
            M.indexing.index(w)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"config.active[{i}]: {exc}") from exc
        active.append(w)
    rep = irrepresentable(M, active, cfg["signs"])
    inactive = [lab for lab in M.indexing.labels if parse_word(lab) not in set(active)]
    run.document(
        "irrep",
        {
            "verdict": rep.verdict,
            "norm_i": rep.norm_i,
            "norm_ii": rep.norm_ii,
            "gamma_i": rep.gamma_i,
            "gamma_ii": rep.gamma_ii,
            "max_abs_entry": rep.norm_i,
            "inactive_words": inactive,
            "vector": rep.vector,
            "active": [word_label(w) for w in active],
            "signs": cfg["signs"],
        },
    )


def cmd_bounds(cfg, args, run: Run):
    out = {
        "q_max": cfg["q_max"],
        "sufficient_bound": sufficient_bound(cfg["q_max"]),
        "equicorrelation_thresholds": {str(int(a)): equicorrelation_threshold(int(a)) for a in cfg["a_values"]},
    }
    try:
        if cfg["ito"] is not None:
            out["ito"] = finite_sample_ito_bounds(**cfg["ito"])
        if cfg["general"] is not None:
            out["general"] = finite_sample_general_bounds(**cfg["general"])
    except TypeError as exc:
        raise ConfigError(f"config.ito/general: {exc}") from exc
    run.document("bounds", out)


def cmd_uniqueness(cfg, args, run: Run):
    corr = _corr_spec(cfg["d"], cfg["rho"])
    params = {"kappa": cfg["kappa"]} if cfg["process"] == "ou" else {}
    spec = ProcessSpec(cfg["process"], corr, cfg["T"], cfg["n_steps"], params)
    p = len(enumerate_words(cfg["d"], cfg["K"]))
    for key in ("a", "b"):
        if cfg[key] is None or len(cfg[key]) != p:
            raise ConfigError(f"config.{key}: need {p} coefficients for d={cfg['d']}, K={cfg['K']}")
    X = simulate_paths(spec, SeededStream(args.seed), cfg["trials"])
    S = signature_batch(X, cfg["K"], cfg["convention"])
    res = uniqueness_bound(S, cfg["a"], cfg["b"], cfg["theta"], cfg["eta"])
    run.document("uniqueness", {k: getattr(res, k) for k in res.__dataclass_fields__})


def _experiment_output(run: Run, stem: str, result):
    if run.format == "json":
        run.document(stem, result.to_json())
    else:
        run.write(f"{stem}.csv", result.to_csv())


def cmd_consistency(cfg, args, run: Run):
    _experiment_output(run, "consistency", consistency_rate(_experiment_config(cfg, args.seed, args.threads)))


def cmd_mse(cfg, args, run: Run):
    _experiment_output(run, "mse", oos_mse(_experiment_config(cfg, args.seed, args.threads)))


def cmd_sweep(cfg, args, run: Run):
    grid = cfg["grid"]
    if grid is None:
        grid = SWEEP_GRIDS.get(cfg["axis"])
        if grid is None:
            raise ConfigError(f"config.grid: no default grid for axis {cfg['axis']!r}")
    exp = {k: v for k, v in cfg.items() if k in _EXPERIMENT}
    result = sweep(_experiment_config(exp, args.seed, args.threads), cfg["axis"], grid, cfg["metric"])
    _experiment_output(run, "sweep", result)


def _payoff_from(spec, where: str):
    from .pricing import Payoff

    try:
        if isinstance(spec, str):
            return Payoff(spec)
        if isinstance(spec, dict):
            return Payoff(spec.get("kind"), spec.get("strike"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: expected a payoff kind or {{kind, strike}} mapping")


def cmd_payoff(cfg, args, run: Run):
    from .pricing import ConventionConfig, LearningConfig, PredictorSet, compare_conventions, learning_payoffs, payoff_learning

    ratios = tuple(cfg["ratios"]) if cfg["ratios"] else tuple(np.geomspace(1.0, 1e-6, 25))
    if cfg["experiment"] == "conventions":
        rows = compare_conventions(
            ConventionConfig(
                K=cfg["K"], kappa=cfg["kappa"], n_train=cfg["n_train"], n_test=cfg["n_test"], reps=cfg["reps"],
                steps=cfg["steps"], ratios=ratios, seed=args.seed, batches=cfg["batches"],
            )
        )
        run.table("conventions", rows)
        return
    payoffs = learning_payoffs() if cfg["payoffs"] is None else tuple(_payoff_from(p, f"config.payoffs[{i}]") for i, p in enumerate(cfg["payoffs"]))
    predictors = tuple(PredictorSet(k, cfg["K"], cfg["convention"]) for k in cfg["predictors"])
    res = payoff_learning(
        LearningConfig(
            payoffs=payoffs, predictors=predictors, ratios=ratios, n_train=cfg["n_train"], n_test=cfg["n_test"],
            reps=cfg["reps"], steps=cfg["steps"], vol=cfg["vol"], rho=cfg["rho"], seed=args.seed,
            batches=cfg["batches"], augment_time=cfg["augment_time"],
        )
    )
    run.table("payoff_curves", res.curve_rows())
    run.table("payoff_best", res.best())
    if res.sig_coefs:
        run.table("payoff_coefs", res.coefficient_rows())


def _book(cfg):
    from .pricing import VasicekModel, rate_book, stock_book

    kw = {}
    if cfg["sources"] is not None:
        kw["source_strikes"] = tuple(_check(cfg["sources"], _Opt("floats"), "config.sources"))
    if cfg["targets"] is not None:
        kw["target_strikes"] = tuple(_check(cfg["targets"], _Opt("floats"), "config.targets"))
    model = cfg["model"] or {}
    try:
        if cfg["book"] == "stock":
            return stock_book(**model, **kw)
        return rate_book(VasicekModel(**model), **kw)
    except TypeError as exc:
        raise ConfigError(f"config.model: {exc}") from exc


def cmd_price(cfg, args, run: Run):
    from .pricing import PipelineConfig, pricing_experiment

    book = _book(cfg)
    pipe = PipelineConfig(cfg["n_paths"], cfg["dt"], cfg["K"], cfg["cv_folds"], cfg["conventions"][0], cfg["augment_time"], threads=args.threads)
    exp = pricing_experiment(book, pipe, tuple(cfg["conventions"]), cfg["reps"], args.seed, cfg["batches"])
    run.table("price_summary", exp.summary())
    run.table("price_targets", exp.target_rows())


COMMANDS = {
    "signature": (cmd_signature, "signature of each path in a CSV file"),
    "simulate": (cmd_simulate, "simulate paths of a process"),
    "corr": (cmd_corr, "signature correlation matrix"),
    "irrep": (cmd_irrep, "irrepresentable-condition report"),
    "bounds": (cmd_bounds, "sufficient bounds and finite-sample probability bounds"),
    "uniqueness": (cmd_uniqueness, "uniqueness probability bound"),
    "consistency": (cmd_consistency, "Lasso sign-consistency rates"),
    "mse": (cmd_mse, "out-of-sample MSE of cross-validated Lasso"),
    "sweep": (cmd_sweep, "rate or MSE along a parameter axis"),
    "payoff": (cmd_payoff, "payoff-learning R^2 experiments"),
    "price": (cmd_price, "signature-derivative option pricing"),
}

# command-line flags that map onto config fields
_FLAG_FIELDS = ("input", "convention", "K", "augment", "process", "rho", "d", "book", "axis", "metric", "experiment")


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}: expected an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV}: must be >= 1, got {n}")
    return n


class _Parser(argparse.ArgumentParser):
    """Usage errors go to stderr as JSON like every other failure."""

    def error(self, message):
        sys.stderr.write(json.dumps(_error("UsageError", f"{self.prog}: {message}", None)) + "\n")
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="siglasso", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML or JSON config file (a manifest replays its run)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")
        p.add_argument("--out-dir", "--out", dest="out_dir", default=".")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if name in HAS_REPS:
            p.add_argument("--reps", type=int)
            p.add_argument("--batches", type=int, help="batches for the confidence intervals")
        fields = SCHEMAS[name]
        if name == "signature":
            p.add_argument("--input", "-i")
            p.add_argument("--augment", action="store_true", default=None)
            p.add_argument("--d", type=int, help="expected path dimension (checked against the header)")
        if "convention" in fields:
            p.add_argument("--convention", choices=CONVENTIONS)
        if "K" in fields:
            p.add_argument("--K", type=int)
        if "process" in fields:
            p.add_argument("--process", choices=fields["process"].choices)
        if "rho" in fields:
            p.add_argument("--rho", type=float)
        if "d" in fields and name != "signature":
            p.add_argument("--d", type=int)
        if name == "price":
            p.add_argument("--book", choices=("stock", "rate"))
        if name == "payoff":
            p.add_argument("--experiment", choices=("learning", "conventions"))
        if name == "sweep":
            p.add_argument("--axis", choices=AXES)
            p.add_argument("--metric", choices=("rate", "mse"))
    return parser


def _error(kind: str, message: str, command: str | None) -> dict:
    return {"error": kind, "message": message, "command": command, "version": __version__}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    started = time.perf_counter()
    try:
        if args.threads is None:
            args.threads = _default_threads()
        if args.threads < 1:
            raise ConfigError(f"--threads: must be >= 1, got {args.threads}")
        raw = load_config(args.config)
        for f in _FLAG_FIELDS:
            v = getattr(args, f, None)
            if v is not None and f in SCHEMAS[command] and not (command == "signature" and f == "d"):
                raw[f] = v
        for f in ("reps", "batches"):
            if getattr(args, f, None) is not None:
                raw[f] = getattr(args, f)
        cfg = resolve(SCHEMAS[command], raw)
        if command == "signature" and args.d is not None:
            cfg_d = args.d
        else:
            cfg_d = None
        run = Run(command, FsPath(args.out_dir), args.format)
        if cfg_d is not None:
            _, d = read_paths_csv(cfg["input"]) if cfg["input"] else (None, cfg_d)
            if d != cfg_d:
                raise ConfigError(f"--d: header has {d} coordinates, expected {cfg_d}")
        COMMANDS[command][0](cfg, args, run)
        manifest = {
            "command": command,
            "config": cfg,
            "seed": args.seed,
            "threads": args.threads,
            "format": args.format,
            "version": __version__,
            "schema_version": SCHEMA_VERSION,
            "outputs": run.outputs,
            "wall_clock_s": time.perf_counter() - started,
        }
        atomic_write(run.out_dir / f"{command}_manifest.json", dumps(manifest))
        summary = ", ".join(o["file"] for o in run.outputs)
        print(f"{command}: wrote {summary} ({manifest['wall_clock_s']:.6g} s)")
        return 0
    except ConfigError as exc:
        sys.stderr.write(json.dumps(_error("ConfigError", str(exc), command)) + "\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as JSON
        sys.stderr.write(json.dumps(_error(type(exc).__name__, str(exc), command)) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
