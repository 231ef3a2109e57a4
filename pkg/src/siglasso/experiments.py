"""Randomised experiments on Lasso selection of signature components.

Each trial ``i`` draws everything from child streams of
``SeededStream(seed, i)``: the model (true words, coefficients, mixing,
ARIMA coefficients) from ``(i, 0)``, the paths from ``(i, 1)``, the response
noise from ``(i, 2)`` and the cross-validation folds from ``(i, 3)``.  Trials
therefore do not depend on execution order or thread count, and grid points
of a sweep share their random inputs.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.stats import norm

from . import __version__
from ._io import rows_to_csv
from .lasso import DegenerateColumnError, LassoPathCV, TrueModel, lasso_path, mean_square_scales, sign_consistent
from .processes import CorrelationSpec, ProcessSpec, SeededStream, psd_cholesky, simulate_paths
from .signature import CONVENTIONS, augment_batch, signature_batch
from .words import word_count

PROCESSES = ("brownian", "ou", "ar1", "arima", "random_walk")
DEFAULT_KAPPA_GRID = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)
AXES = ("rho", "kappa", "one_minus_phi", "d", "n_samples", "q", "K", "integrate", "arima", "augment_time", "noise")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one experiment grid point.

    ``mixing="fixed"`` uses the equicorrelation ``rho``; ``"wishart"`` draws
    ``Gamma Gamma^T`` from a Wishart distribution with ``d`` degrees of
    freedom and identity scale for every trial.  ``arima`` is ``(p, I, q)``.
    """

    process: str = "brownian"
    d: int = 2
    rho: float = 0.0
    kappa: float = 0.0
    phi: float = 0.0
    arima: tuple[int, int, int] = (0, 1, 0)
    mixing: str = "fixed"
    conventions: tuple[str, ...] = ("ito", "stratonovich")
    K: int = 4
    q: int = 3
    n_samples: int = 100
    n_test: int = 100
    noise: float = 0.01
    reps: int = 200
    seed: int = 0
    n_steps: int = 100
    T: float = 1.0
    augment_time: bool = False
    batches: int = 10
    cv_folds: int = 5
    threads: int = 1

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise ValueError(f"process must be one of {PROCESSES}, got {self.process!r}")
        if self.mixing not in ("fixed", "wishart"):
            raise ValueError("mixing must be 'fixed' or 'wishart'")
        for c in self.conventions:
            if c not in CONVENTIONS:
                raise ValueError(f"unknown convention {c!r}")
        object.__setattr__(self, "conventions", tuple(self.conventions))
        object.__setattr__(self, "arima", tuple(int(v) for v in self.arima))
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not 0 <= self.q <= self.n_words:
            raise ValueError(f"q must lie in 0..{self.n_words}, got {self.q}")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.batches < 1:
            raise ValueError("batches must be >= 1")

    @property
    def path_dim(self) -> int:
        return self.d + (1 if self.augment_time else 0)

    @property
    def n_words(self) -> int:
        return word_count(self.path_dim, self.K)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    """One row per grid point and convention plus provenance."""

    metric: str
    rows: list[dict]
    config: dict
    axis: str | None = None
    provenance: dict = field(default_factory=dict)

    def value(self, convention: str, axis_value=None) -> dict:
        for r in self.rows:
            if r["convention"] == convention and (axis_value is None or r.get("axis_value") == axis_value):
                return r
        raise KeyError((convention, axis_value))

    def to_csv(self) -> str:
        cols = ["axis", "axis_value", "convention", "metric", "estimate", "ci_low", "ci_high", "ci_half_width", "n_trials", "failed_trials"]
        return rows_to_csv([{**r, "axis": self.axis or "", "metric": self.metric} for r in self.rows], cols)

    def to_json(self) -> dict:
        return {
            "schema_version": "1",
            "metric": self.metric,
            "axis": self.axis,
            "rows": self.rows,
            "config": self.config,
            "provenance": self.provenance,
        }


def with_confidence(values, batches: int, level: float = 0.90) -> tuple[float, float, np.ndarray]:
    """Mean and normal-approximation CI half-width from batch means.

    ``values`` are per-trial outcomes split into ``batches`` contiguous batches
    of equal size (trailing trials beyond a multiple of ``batches`` are kept
    in the overall mean only).
    """
    values = np.asarray(values, dtype=np.float64)
    if batches < 2:
        raise ValueError("need at least 2 batches for a confidence interval")
    size = values.size // batches
    if size < 1:
        raise ValueError(f"{values.size} trials cannot fill {batches} batches")
    means = values[: size * batches].reshape(batches, size).mean(axis=1)
    z = float(norm.ppf(0.5 + level / 2))
    half = z * float(means.std(ddof=1)) / math.sqrt(batches)
    return float(values.mean()), half, means


def _stationary_ar(rng: np.random.Generator, order: int) -> np.ndarray:
    while True:
        phi = rng.uniform(-1.0, 1.0, order)
        roots = np.roots(np.r_[-phi[::-1], 1.0]) if order else np.array([])
        if np.all(np.abs(roots) > 1.0 + 1e-9):
            return phi


def _process_spec(cfg: ExperimentConfig, rng: np.random.Generator) -> ProcessSpec:
    if cfg.mixing == "wishart":
        Z = rng.standard_normal((cfg.d, cfg.d))
        corr = CorrelationSpec(psd_cholesky(Z @ Z.T))
    else:
        corr = CorrelationSpec.equicorrelated(cfg.d, cfg.rho)
    params: dict = {}
    if cfg.process == "ou":
        params["kappa"] = cfg.kappa
    elif cfg.process == "ar1":
        params["phi"] = cfg.phi
    elif cfg.process == "arima":
        p, I, q = cfg.arima
        params = {"ar": _stationary_ar(rng, p).tolist(), "ma": rng.uniform(-1.0, 1.0, q).tolist(), "integrate": I}
    return ProcessSpec(cfg.process, corr, cfg.T, cfg.n_steps, params)


def _draw_model(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    beta = np.zeros(cfg.n_words)
    words = rng.choice(cfg.n_words, size=cfg.q, replace=False)
    b = rng.standard_normal(cfg.q)
    while np.any(np.abs(b) < 1e-8):
        small = np.abs(b) < 1e-8
        b[small] = rng.standard_normal(int(small.sum()))
    beta[words] = b
    return beta


def _trial_inputs(cfg: ExperimentConfig, i: int, n_total: int):
    base = SeededStream(cfg.seed, i)
    model_rng = base.child(0).generator()
    beta = _draw_model(cfg, model_rng)
    spec = _process_spec(cfg, model_rng)
    paths = simulate_paths(spec, base.child(1), n_total)
    if cfg.augment_time:
        paths = augment_batch(paths, spec.times)
    eps = base.child(2).generator().standard_normal(n_total)
    return beta, paths, eps, base


def _rate_trial(cfg: ExperimentConfig, i: int) -> dict:
    beta, paths, eps, _ = _trial_inputs(cfg, i, cfg.n_samples)
    out = {}
    for conv in cfg.conventions:
        S = signature_batch(paths, cfg.K, conv)
        y = S @ beta + cfg.noise * eps
        try:
            scales = mean_square_scales(S)
        except DegenerateColumnError as exc:
            out[conv] = (0.0, str(exc))
            continue
        path = lasso_path(S / scales, y)
        out[conv] = (float(sign_consistent(path, TrueModel(beta, cfg.noise), scales)), None)
    return out


def _mse_trial(cfg: ExperimentConfig, i: int) -> dict:
    N = cfg.n_samples
    beta, paths, eps, base = _trial_inputs(cfg, i, N + cfg.n_test)
    out = {}
    for conv in cfg.conventions:
        S = signature_batch(paths, cfg.K, conv)
        y = S @ beta + cfg.noise * eps
        try:
            model = LassoPathCV(cv=cfg.cv_folds, random_state=base.child(3).generator()).fit(S[:N], y[:N])
        except DegenerateColumnError as exc:
            out[conv] = (math.nan, str(exc))
            continue
        resid = y[N:] - model.predict(S[N:])
        out[conv] = (float(np.mean(resid**2)), None)
    return out


def _run(cfg: ExperimentConfig, trial_fn) -> dict[str, tuple[np.ndarray, list]]:
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(lambda i: trial_fn(cfg, i), range(cfg.reps)))
    else:
        results = [trial_fn(cfg, i) for i in range(cfg.reps)]
    out = {}
    for conv in cfg.conventions:
        vals = np.array([r[conv][0] for r in results])
        reasons = [r[conv][1] for r in results if r[conv][1] is not None]
        out[conv] = (vals, reasons)
    return out


def _summarise(cfg: ExperimentConfig, values: np.ndarray, reasons: list, conv: str, axis_value=None) -> dict:
    finite = values[np.isfinite(values)]
    row = {
        "axis_value": axis_value,
        "convention": conv,
        "estimate": float(finite.mean()) if finite.size else math.nan,
        "n_trials": int(values.size),
        "failed_trials": len(reasons),
    }
    if cfg.batches >= 2 and finite.size >= cfg.batches:
        mean, half, _ = with_confidence(finite, cfg.batches)
        row.update(ci_half_width=half, ci_low=row["estimate"] - half, ci_high=row["estimate"] + half)
    if reasons:
        row["failure_reasons"] = sorted(set(reasons))
    return row


def _provenance(cfg: ExperimentConfig, started: float) -> dict:
    return {"seed": cfg.seed, "version": __version__, "wall_clock_s": time.perf_counter() - started}


def consistency_rate(config: ExperimentConfig) -> ExperimentResult:
    """Fraction of trials whose Lasso path contains the true sign pattern."""
    t0 = time.perf_counter()
    res = _run(config, _rate_trial)
    rows = [_summarise(config, *res[c], c) for c in config.conventions]
    return ExperimentResult("consistency_rate", rows, config.to_dict(), None, _provenance(config, t0))


def oos_mse(config: ExperimentConfig) -> ExperimentResult:
    """Test-set MSE of the cross-validated Lasso (train and test halves)."""
    t0 = time.perf_counter()
    res = _run(config, _mse_trial)
    rows = [_summarise(config, *res[c], c) for c in config.conventions]
    return ExperimentResult("oos_mse", rows, config.to_dict(), None, _provenance(config, t0))


def _apply_axis(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    if axis == "one_minus_phi":
        return replace(cfg, phi=1.0 - float(value))
    if axis == "arima":
        return replace(cfg, arima=tuple(value))
    if axis in ("d", "n_samples", "q", "K", "integrate"):
        if axis == "integrate":
            p, _, q = cfg.arima
            return replace(cfg, arima=(p, int(value), q))
        return replace(cfg, **{axis: int(value)})
    if axis == "augment_time":
        return replace(cfg, augment_time=bool(value))
    return replace(cfg, **{axis: float(value)})


def sweep(config: ExperimentConfig, axis: str, grid: Sequence, metric: str = "rate") -> ExperimentResult:
    """Run the rate (or ``"mse"``) experiment at every grid value of ``axis``."""
    t0 = time.perf_counter()
    trial_fn = {"rate": _rate_trial, "mse": _mse_trial}[metric]
    rows = []
    for value in grid:
        cfg = _apply_axis(config, axis, value)
        res = _run(cfg, trial_fn)
        key = list(value) if isinstance(value, (tuple, list)) else value
        rows.extend(_summarise(cfg, *res[c], c, key) for c in cfg.conventions)
    name = "consistency_rate" if metric == "rate" else "oos_mse"
    return ExperimentResult(name, rows, config.to_dict(), axis, _provenance(config, t0))


def mean_reversion_sweep(config: ExperimentConfig, grid: Sequence | None = None) -> ExperimentResult:
    """Consistency rate against mean-reversion speed with Wishart mixing.

    OU sweeps ``kappa``; AR(1) sweeps ``1 - phi``.  The default grid
    ``(0, 0.5, 1, 2, 4, 8)`` is a choice of this package.
    """
    if config.process not in ("ou", "ar1"):
        raise ValueError("mean reversion sweeps need process 'ou' or 'ar1'")
    cfg = replace(config, mixing="wishart")
    axis = "kappa" if cfg.process == "ou" else "one_minus_phi"
    if grid is None:
        grid = DEFAULT_KAPPA_GRID if axis == "kappa" else (0.0, 0.05, 0.1, 0.2, 0.4, 0.8)
    return sweep(cfg, axis, grid)


STRUCTURAL_DEFAULTS = {
    "d": (2, 3, 4),
    "n_samples": (50, 100, 200, 400),
    "arima": ((0, 0, 0), (1, 0, 1), (0, 1, 0), (1, 1, 1), (0, 2, 0), (1, 2, 1)),
    "augment_time": (False, True),
}


def structural_sweeps(config: ExperimentConfig, axis: str, grid: Sequence | None = None) -> ExperimentResult:
    """Dimension, sample-size, ARIMA-order or time-augmentation sweeps."""
    aliases = {"N": "n_samples", "time_augmentation": "augment_time", "p_I_q": "arima"}
    axis = aliases.get(axis, axis)
    if axis not in STRUCTURAL_DEFAULTS:
        raise ValueError(f"structural axis must be one of {sorted(STRUCTURAL_DEFAULTS)} (or N, time_augmentation)")
    if axis == "arima" and config.process != "arima":
        config = replace(config, process="arima")
    return sweep(config, axis, STRUCTURAL_DEFAULTS[axis] if grid is None else grid)


def cis_overlap(a: dict, b: dict) -> bool:
    """True when the two rows' CIs intersect."""
    return not (a["ci_low"] > b["ci_high"] or b["ci_low"] > a["ci_high"])
