"""Seeded simulation of the Gaussian and discrete processes on a uniform grid.

Randomness comes from numpy's PCG64 generator seeded by
``SeedSequence(seed, spawn_key=stream_id)``; normals use numpy's ziggurat
sampler.  The same (seed, stream id) reproduces identical draws.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ._io import fmt
from ._validation import check_int, check_real
from .signature import Path

KINDS = ("brownian", "ou", "random_walk", "ar1", "arima", "gbm", "vasicek")


def psd_cholesky(cov, tol: float = 1e-12) -> np.ndarray:
    """Lower-triangular factor ``L`` with ``L @ L.T == cov`` for PSD ``cov``.

    Zero pivots (singular targets such as perfect correlation) give zero
    columns instead of failing.
    """
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError("covariance target is not symmetric")
    scale = max(1.0, float(np.max(np.abs(np.diag(cov)))))
    eig = np.linalg.eigvalsh(cov)
    if eig[0] < -1e-10 * scale:
        raise ValueError(f"covariance target is not positive semidefinite (min eigenvalue {eig[0]:.3g})")
    d = cov.shape[0]
    L = np.zeros_like(cov)
    for j in range(d):
        pivot = cov[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= tol * scale:
            continue
        L[j, j] = np.sqrt(pivot)
        L[j + 1 :, j] = (cov[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True)
class CorrelationSpec:
    """Cross-dimensional mixing ``X = Gamma Y`` of independent coordinates."""

    mixing: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.mixing, dtype=np.float64))
        if G.shape[0] != G.shape[1]:
            raise ValueError(f"mixing matrix must be square, got {G.shape}")
        if not np.all(np.isfinite(G)):
            raise ValueError("mixing matrix has non-finite entries")
        object.__setattr__(self, "mixing", G)

    @classmethod
    def from_correlation(cls, rho, sigma=None) -> "CorrelationSpec":
        """Cholesky mixing for a target correlation matrix and volatilities."""
        rho = np.atleast_2d(np.asarray(rho, dtype=np.float64))
        d = rho.shape[0]
        if not np.allclose(np.diag(rho), 1.0):
            raise ValueError("correlation target must have unit diagonal")
        if np.any(np.abs(rho) > 1 + 1e-12):
            raise ValueError("correlation entries must lie in [-1, 1]")
        sigma = np.ones(d) if sigma is None else np.broadcast_to(np.asarray(sigma, float), (d,))
        if np.any(sigma < 0):
            raise ValueError("volatilities must be nonnegative")
        cov = rho * np.outer(sigma, sigma)
        return cls(psd_cholesky(cov))

    @classmethod
    def equicorrelated(cls, d: int, rho: float = 0.0, sigma=1.0) -> "CorrelationSpec":
        d = check_int(d, "d", minimum=1)
        R = np.full((d, d), float(rho))
        np.fill_diagonal(R, 1.0)
        return cls.from_correlation(R, sigma)

    @classmethod
    def from_covariance(cls, cov) -> "CorrelationSpec":
        return cls(psd_cholesky(cov))

    @property
    def d(self) -> int:
        return self.mixing.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        return self.mixing @ self.mixing.T

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    @property
    def correlation(self) -> np.ndarray:
        s = self.sigma
        with np.errstate(invalid="ignore", divide="ignore"):
            R = self.covariance / np.outer(s, s)
        R[~np.isfinite(R)] = 0.0
        np.fill_diagonal(R, 1.0)
        return R

    def unit_mixing(self) -> np.ndarray:
        """Cholesky factor of the correlation matrix alone."""
        return psd_cholesky(self.correlation)


@dataclass(frozen=True)
class SeededStream:
    """Independent random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: tuple[int, ...] | int = ()

    def __post_init__(self):
        sid = self.stream_id
        sid = (int(sid),) if np.isscalar(sid) else tuple(int(s) for s in sid)
        if self.seed < 0 or any(s < 0 for s in sid):
            raise ValueError("seed and stream ids must be nonnegative")
        object.__setattr__(self, "stream_id", sid)

    def child(self, *ids: int) -> "SeededStream":
        return SeededStream(self.seed, self.stream_id + tuple(ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.stream_id)
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ProcessSpec:
    """A process kind, its parameters, mixing and grid.

    Parameters by kind (per-dimension values may be scalars)

    ``brownian``      none
    ``ou``            ``kappa`` >= 0
    ``random_walk``   none (steps +1/-1)
    ``ar1``           ``phi``
    ``arima``         ``ar`` (list), ``ma`` (list), ``integrate`` (I >= 0)
    ``gbm``           ``drift``, ``vol``, ``x0``
    ``vasicek``       ``gamma`` >= 0, ``rbar``, ``sigma`` > 0, ``r0``

    For ``gbm`` and ``vasicek`` the correlation part of ``correlation`` mixes
    the innovations; for the other kinds the full mixing matrix is applied to
    the simulated zero-started paths.
    """

    kind: str
    correlation: CorrelationSpec
    T: float = 1.0
    n: int = 100
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown process kind {self.kind!r}; expected one of {KINDS}")
        check_real(self.T, "T", lower=0.0, lower_open=True)
        check_int(self.n, "n", minimum=1)
        p = dict(self.params)
        d = self.correlation.d
        if self.kind == "ou":
            kappa = np.broadcast_to(np.asarray(p.get("kappa", 0.0), float), (d,))
            if np.any(kappa < 0) or not np.all(np.isfinite(kappa)):
                raise ValueError("ou requires kappa >= 0 in every dimension")
        if self.kind == "ar1" and "phi" not in p:
            raise ValueError("ar1 requires phi")
        if self.kind == "arima":
            check_int(p.get("integrate", 0), "integrate", minimum=0)
        if self.kind == "gbm":
            vol = np.asarray(p.get("vol", 0.2), float)
            if np.any(vol < 0):
                raise ValueError("gbm vol must be nonnegative")
        if self.kind == "vasicek":
            check_real(p.get("gamma", 0.1), "gamma", lower=0.0)
            check_real(p.get("sigma", 0.02), "sigma", lower=0.0, lower_open=True)
        object.__setattr__(self, "params", p)

    @property
    def d(self) -> int:
        return self.correlation.d

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n + 1)

    def param(self, name: str, default) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.params.get(name, default), float), (self.d,)).copy()


def _linear_recursion(eps: np.ndarray, coef: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Z_{k+1} = coef * Z_k + shift * eps_k with Z_0 = 0."""
    m, n, d = eps.shape
    Z = np.zeros((m, n + 1, d))
    for k in range(n):
        Z[:, k + 1] = coef * Z[:, k] + shift * eps[:, k]
    return Z


def _ou_recursion(eps: np.ndarray, kappa: np.ndarray, dt: float) -> np.ndarray:
    m, n, d = eps.shape
    Y = np.zeros((m, n + 1, d))
    sq = np.sqrt(dt)
    for k in range(n):
        Y[:, k + 1] = Y[:, k] - kappa * Y[:, k] * dt + sq * eps[:, k]
    return Y


def _arma(eps: np.ndarray, ar, ma) -> np.ndarray:
    m, n, d = eps.shape
    ar = [float(a) for a in ar]
    ma = [float(b) for b in ma]
    Z = np.zeros((m, n + 1, d))
    for k in range(1, n + 1):
        z = eps[:, k - 1].copy()
        for i, a in enumerate(ar, start=1):
            if k - i >= 1:
                z += a * Z[:, k - i]
        for j, b in enumerate(ma, start=1):
            if k - 1 - j >= 0:
                z += b * eps[:, k - 1 - j]
        Z[:, k] = z
    return Z


def _integrate(Z: np.ndarray, times: int) -> np.ndarray:
    for _ in range(times):
        out = np.zeros_like(Z)
        for k in range(1, Z.shape[1]):
            out[:, k] = out[:, k - 1] + Z[:, k]
        Z = out
    return Z


def simulate_paths(spec: ProcessSpec, stream: SeededStream, n_paths: int = 1) -> np.ndarray:
    """Simulate ``n_paths`` paths of ``spec``; returns shape (n_paths, n + 1, d)."""
    n_paths = check_int(n_paths, "n_paths", minimum=1)
    rng = stream.generator()
    m, n, d = n_paths, spec.n, spec.d
    kind = spec.kind
    if kind == "random_walk":
        steps = rng.integers(0, 2, size=(m, n, d)).astype(np.float64) * 2.0 - 1.0
        Y = _linear_recursion(steps, np.ones(d), np.ones(d))
        return Y @ spec.correlation.mixing.T
    eps = rng.standard_normal((m, n, d))
    if kind in ("brownian", "ou"):
        kappa = spec.param("kappa", 0.0) if kind == "ou" else np.zeros(d)
        Y = _ou_recursion(eps, kappa, spec.dt)
        return Y @ spec.correlation.mixing.T
    if kind == "ar1":
        Y = _linear_recursion(eps, spec.param("phi", 0.0), np.ones(d))
        return Y @ spec.correlation.mixing.T
    if kind == "arima":
        Y = _arma(eps, spec.params.get("ar", ()), spec.params.get("ma", ()))
        Y = _integrate(Y, int(spec.params.get("integrate", 0)))
        return Y @ spec.correlation.mixing.T
    mixed = eps @ spec.correlation.unit_mixing().T
    dt = spec.dt
    if kind == "gbm":
        mu, vol, x0 = spec.param("drift", 0.0), spec.param("vol", 0.2), spec.param("x0", 1.0)
        logs = (mu - 0.5 * vol**2) * dt + vol * np.sqrt(dt) * mixed
        out = np.empty((m, n + 1, d))
        out[:, 0] = x0
        out[:, 1:] = x0 * np.exp(np.cumsum(logs, axis=1))
        return out
    # vasicek
    g, rbar = spec.param("gamma", 0.1), spec.param("rbar", 0.03)
    sig, r0 = spec.param("sigma", 0.02), spec.param("r0", 0.03)
    out = np.empty((m, n + 1, d))
    out[:, 0] = r0
    sq = np.sqrt(dt)
    for k in range(n):
        r = out[:, k]
        out[:, k + 1] = r + g * (rbar - r) * dt + sig * sq * mixed[:, k]
    return out


def simulate(spec: ProcessSpec, stream: SeededStream) -> Path:
    """Simulate one path of ``spec``."""
    return Path(spec.times, simulate_paths(spec, stream, 1)[0])


def gbm_pair_paths(rho: float, vol_per_step: float, steps: int, stream: SeededStream, n_paths: int = 1) -> np.ndarray:
    """Two driftless-in-log GBM paths from 1 with correlated N(0, vol^2) log steps."""
    rho = check_real(rho, "rho", lower=-1.0, upper=1.0)
    vol = check_real(vol_per_step, "vol_per_step", lower=0.0)
    steps = check_int(steps, "steps", minimum=1)
    L = psd_cholesky(np.array([[1.0, rho], [rho, 1.0]]))
    eps = stream.generator().standard_normal((n_paths, steps, 2)) @ L.T
    out = np.ones((n_paths, steps + 1, 2))
    out[:, 1:] = np.exp(np.cumsum(vol * eps, axis=1))
    return out


def gbm_pair(rho: float, vol_per_step: float, steps: int, stream: SeededStream) -> Path:
    """Single correlated GBM pair on ``[0, 1]``."""
    values = gbm_pair_paths(rho, vol_per_step, steps, stream, 1)[0]
    return Path(np.linspace(0.0, 1.0, steps + 1), values)


def path_to_csv(path: Path, handle=None) -> str | None:
    """Write ``t, x1..xd`` rows; returns the text when ``handle`` is None."""
    buf = io.StringIO() if handle is None else handle
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"x{i}" for i in range(1, path.d + 1)])
    for t, row in zip(path.times, path.values):
        writer.writerow([fmt(float(t))] + [fmt(float(v)) for v in row])
    return buf.getvalue() if handle is None else None
