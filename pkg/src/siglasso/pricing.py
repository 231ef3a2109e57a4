"""Option payoffs, closed-form prices and the signature-derivative pricing pipeline.

Two families live here:

* payoff learning: regress option payoffs on signature features (or on raw
  path samples) and score the fits by in-sample and out-of-sample R^2;
* price transfer: learn payoffs of quoted "source" instruments and unquoted
  "target" instruments as linear combinations of signature components, back
  out the prices of the signature components from the source quotes, and
  price the targets with them.

The analytic anchors are the Black-Scholes-Merton formula with a continuous
dividend yield and the Vasicek zero-coupon-bond option formula.

Vasicek caplet convention
-------------------------
With fixing ``T1``, payment ``T2 = T1 + tau`` and simple rate
``L = (1 / P(T1, T2) - 1) / tau``, the caplet pays ``N * max(L - K, 0)`` at
``T2`` (no accrual factor: the notional multiplies the rate difference
directly). Its value at ``T1`` is ``N * P(T1, T2) * max(L - K, 0)``, which
rearranges to ``(N / tau) * (1 + K tau) * max(X - P(T1, T2), 0)`` with
``X = 1 / (1 + K tau)``: a put on the bond. Hence

    caplet   = (N / tau) (1 + K tau) ZBP(0, T1, T2, X)
    floorlet = (N / tau) (1 + K tau) ZBC(0, T1, T2, X)

and ``caplet - floorlet = N P(0, T2) (F - K)`` with ``F`` the forward simple
rate.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from . import __version__
from ._io import rows_to_csv
from ._validation import check_int, check_paths, check_real
from .experiments import with_confidence
from .lasso import LassoPathCV, lasso_path, mean_square_scales
from .processes import CorrelationSpec, ProcessSpec, SeededStream, gbm_pair_paths, simulate_paths
from .signature import CONVENTIONS, Path, augment_batch, signature_batch
from .words import WordIndexing, word_count

PAYOFF_KINDS = ("call", "put", "asian", "lookback", "rainbow1", "rainbow2", "rainbow3", "rainbow4")
DEFAULT_STRIKES = {"call": 1.2, "put": 0.8, "asian": 1.2, "lookback": 1.2, "rainbow2": 1.2, "rainbow4": 2.4}
PREDICTOR_KINDS = ("sig", "rsam", "usam")


# ---------------------------------------------------------------- payoffs


@dataclass(frozen=True)
class Payoff:
    """A path-dependent option payoff.

    Parameters
    ----------
    kind : str
        One of ``PAYOFF_KINDS``.
    strike : float, optional
        Used by every kind except ``rainbow1`` and ``rainbow3``; defaults to
        the learning-experiment strikes (1.2 for calls, 0.8 for the put,
        2.4 for the two-asset average).
    """

    kind: str
    strike: float | None = None

    def __post_init__(self):
        if self.kind not in PAYOFF_KINDS:
            raise ValueError(f"unknown payoff kind {self.kind!r}; expected one of {PAYOFF_KINDS}")
        if self.kind in DEFAULT_STRIKES:
            k = DEFAULT_STRIKES[self.kind] if self.strike is None else self.strike
            object.__setattr__(self, "strike", check_real(k, "strike"))
        elif self.strike is not None:
            raise ValueError(f"{self.kind} takes no strike")

    @property
    def d(self) -> int:
        return 2 if self.kind.startswith("rainbow") else 1

    @property
    def name(self) -> str:
        return self.kind if self.strike is None else f"{self.kind}({self.strike:g})"

    def __call__(self, paths) -> np.ndarray:
        X = check_paths(paths)
        if X.shape[2] != self.d:
            raise ValueError(f"{self.kind} payoff needs {self.d}-dimensional paths, got d={X.shape[2]}")
        k, K = self.kind, self.strike
        x = X[:, :, 0]
        if k == "call":
            v = x[:, -1] - K
        elif k == "put":
            v = K - x[:, -1]
        elif k == "asian":
            v = x.mean(axis=1) - K
        elif k == "lookback":
            v = x.max(axis=1) - K
        else:
            y = X[:, :, 1]
            if k == "rainbow1":
                v = x[:, -1] - y[:, -1]
            elif k == "rainbow2":
                v = np.maximum(x[:, -1], y[:, -1]) - K
            elif k == "rainbow3":
                v = x.max(axis=1) - y.max(axis=1)
            else:
                v = x.mean(axis=1) + y.mean(axis=1) - K
        return np.maximum(v, 0.0)


def learning_payoffs() -> tuple[Payoff, ...]:
    """The eight payoffs of the learning experiment with their default strikes."""
    return tuple(Payoff(k) for k in PAYOFF_KINDS)


def evaluate_payoff(payoff: Payoff, *paths) -> np.ndarray | float:
    """Evaluate ``payoff`` on one path, two 1-d paths, or a batch array.

    Two :class:`Path` arguments are stacked into one 2-d path (they must
    share their time grid). A single :class:`Path` returns a float.
    """
    if len(paths) == 2:
        a, b = paths
        if not (isinstance(a, Path) and isinstance(b, Path)):
            raise TypeError("two-path form needs two Path objects")
        if a.d != 1 or b.d != 1:
            raise ValueError("two-path form needs two 1-dimensional paths")
        if a.times.shape != b.times.shape or not np.allclose(a.times, b.times):
            raise ValueError("paths must share their time grid")
        return float(payoff(np.concatenate([a.values, b.values], axis=1))[0])
    if len(paths) != 1:
        raise TypeError("pass one path, two paths, or one batch array")
    p = paths[0]
    if isinstance(p, Path):
        return float(payoff(p.values)[0])
    return payoff(p)


# ---------------------------------------------------------------- closed forms


def bsm_price(kind: str, S0: float, strike: float, r: float, q_div: float, vol: float, T: float) -> float:
    """Black-Scholes-Merton price of a European call or put with dividend yield ``q_div``."""
    if kind not in ("call", "put"):
        raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")
    S0 = check_real(S0, "S0", lower=0.0, lower_open=True)
    strike = check_real(strike, "strike", lower=0.0, lower_open=True)
    vol = check_real(vol, "vol", lower=0.0, lower_open=True)
    T = check_real(T, "T", lower=0.0, lower_open=True)
    r = check_real(r, "r")
    q_div = check_real(q_div, "q_div")
    sd = vol * math.sqrt(T)
    fwd = S0 * math.exp((r - q_div) * T)
    d1 = (math.log(fwd / strike) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    df = math.exp(-r * T)
    if kind == "call":
        return df * (fwd * norm.cdf(d1) - strike * norm.cdf(d2))
    return df * (strike * norm.cdf(-d2) - fwd * norm.cdf(-d1))


def bsm_mc_price(kind: str, S0, strike, r, q_div, vol, T, n_paths: int = 1_000_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo price and standard error from exact terminal draws."""
    z = np.random.default_rng(seed).standard_normal(n_paths)
    ST = S0 * np.exp((r - q_div - 0.5 * vol**2) * T + vol * math.sqrt(T) * z)
    pay = np.maximum(ST - strike, 0.0) if kind == "call" else np.maximum(strike - ST, 0.0)
    pay *= math.exp(-r * T)
    return float(pay.mean()), float(pay.std(ddof=1) / math.sqrt(n_paths))


@dataclass(frozen=True)
class VasicekModel:
    """``dr = gamma (rbar - r) dt + sigma dW`` under the pricing measure."""

    r0: float = 0.03
    gamma: float = 0.1
    rbar: float = 0.03
    sigma: float = 0.02

    def __post_init__(self):
        check_real(self.gamma, "gamma", lower=0.0)
        check_real(self.sigma, "sigma", lower=0.0)
        check_real(self.r0, "r0")
        check_real(self.rbar, "rbar")

    def B(self, tau):
        tau = np.asarray(tau, float)
        if self.gamma == 0.0:
            return tau
        return -np.expm1(-self.gamma * tau) / self.gamma

    def bond(self, tau, r=None):
        """Zero-coupon bond price ``P(t, t + tau)`` given short rate ``r`` at ``t``."""
        r = self.r0 if r is None else np.asarray(r, float)
        g, s, rb = self.gamma, self.sigma, self.rbar
        tau = np.asarray(tau, float)
        B = self.B(tau)
        if g == 0.0:
            logA = s * s * tau**3 / 6.0
        else:
            logA = (B - tau) * (g * g * rb - 0.5 * s * s) / (g * g) - s * s * B * B / (4.0 * g)
        return np.exp(logA - B * r)

    def bond_option(self, kind: str, T: float, S: float, X: float) -> float:
        """Time-0 price of a call/put expiring at ``T`` on the bond maturing at ``S``."""
        P_T, P_S = float(self.bond(T)), float(self.bond(S))
        g = self.gamma
        var_T = T if g == 0.0 else -math.expm1(-2.0 * g * T) / (2.0 * g)
        sp = self.sigma * math.sqrt(var_T) * float(self.B(S - T))
        if sp == 0.0:
            intrinsic = P_S - X * P_T
            return max(intrinsic, 0.0) if kind == "call" else max(-intrinsic, 0.0)
        h = math.log(P_S / (P_T * X)) / sp + 0.5 * sp
        if kind == "call":
            return P_S * norm.cdf(h) - X * P_T * norm.cdf(h - sp)
        return X * P_T * norm.cdf(-h + sp) - P_S * norm.cdf(-h)

    def forward_rate(self, fixing: float, tenor: float) -> float:
        return float((self.bond(fixing) / self.bond(fixing + tenor) - 1.0) / tenor)

    def simple_rate(self, r_fix, tenor: float) -> np.ndarray:
        """Simple rate over ``tenor`` set when the short rate is ``r_fix``."""
        return (1.0 / self.bond(tenor, r_fix) - 1.0) / tenor


def vasicek_caplet_floorlet(
    kind: str,
    notional: float,
    r0: float,
    gamma: float,
    rbar: float,
    sigma: float,
    strike: float,
    fixing: float = 0.5,
    tenor: float = 0.5,
) -> float:
    """Caplet or floorlet on the simple rate set at ``fixing``, paid at ``fixing + tenor``.

    The payoff is ``notional * max(L - strike, 0)`` (caplet) or
    ``notional * max(strike - L, 0)`` (floorlet).
    """
    if kind not in ("caplet", "floorlet"):
        raise ValueError(f"kind must be 'caplet' or 'floorlet', got {kind!r}")
    check_real(notional, "notional", lower=0.0, lower_open=True)
    fixing = check_real(fixing, "fixing", lower=0.0, lower_open=True)
    tenor = check_real(tenor, "tenor", lower=0.0, lower_open=True)
    strike = check_real(strike, "strike", lower=-1.0 / tenor, lower_open=True)
    m = VasicekModel(r0, gamma, rbar, sigma)
    X = 1.0 / (1.0 + strike * tenor)
    opt = m.bond_option("put" if kind == "caplet" else "call", fixing, fixing + tenor, X)
    return notional / tenor * (1.0 + strike * tenor) * opt


def _integrated_moments(m: VasicekModel, T: float):
    """Mean and covariance of ``(r_T, int_0^T r ds)``."""
    g, s = m.gamma, m.sigma
    B = float(m.B(T))
    mean_r = m.rbar + (m.r0 - m.rbar) * math.exp(-g * T)
    mean_i = m.rbar * T + (m.r0 - m.rbar) * B
    if g * T < 1e-3:
        var_r = s * s * (T - g * T * T + 2.0 * g * g * T**3 / 3.0)
        var_i = s * s * (T**3 / 3.0 - g * T**4 / 4.0 + 7.0 * g * g * T**5 / 60.0)
    else:
        var_r = s * s * (-math.expm1(-2.0 * g * T)) / (2.0 * g)
        var_i = s * s / (g * g) * (T - 2.0 * B - math.expm1(-2.0 * g * T) / (2.0 * g))
    cov = s * s * B * B / 2.0
    return np.array([mean_r, mean_i]), np.array([[var_r, cov], [cov, var_i]])


def vasicek_mc_price(
    kind: str,
    notional,
    r0,
    gamma,
    rbar,
    sigma,
    strike,
    fixing: float = 0.5,
    tenor: float = 0.5,
    n_paths: int = 1_000_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo caplet/floorlet price and standard error.

    Draws ``(r_fix, int_0^fix r)`` exactly from their joint Gaussian law,
    discounts with ``exp(-int r)`` to 0 and with the model bond price from
    payment back to fixing.
    """
    m = VasicekModel(r0, gamma, rbar, sigma)
    mean, cov = _integrated_moments(m, fixing)
    z = np.random.default_rng(seed).standard_normal((n_paths, 2))
    L = np.linalg.cholesky(cov + 1e-300 * np.eye(2)) if sigma > 0 else np.zeros((2, 2))
    draws = mean + z @ L.T
    r_fix, integral = draws[:, 0], draws[:, 1]
    rate = m.simple_rate(r_fix, tenor)
    diff = rate - strike if kind == "caplet" else strike - rate
    pay = notional * np.maximum(diff, 0.0) * m.bond(tenor, r_fix) * np.exp(-integral)
    return float(pay.mean()), float(pay.std(ddof=1) / math.sqrt(n_paths))


# ---------------------------------------------------------------- instruments


@dataclass(frozen=True)
class RatePayoff:
    """Caplet/floorlet payoff read off the terminal short rate of a path ending at fixing."""

    kind: str
    strike: float
    model: VasicekModel
    notional: float = 100.0
    tenor: float = 0.5

    def __post_init__(self):
        if self.kind not in ("caplet", "floorlet"):
            raise ValueError(f"kind must be 'caplet' or 'floorlet', got {self.kind!r}")

    d = 1

    @property
    def name(self) -> str:
        return f"{self.kind}({self.strike:g})"

    def __call__(self, paths) -> np.ndarray:
        X = check_paths(paths)
        rate = self.model.simple_rate(X[:, -1, 0], self.tenor)
        diff = rate - self.strike if self.kind == "caplet" else self.strike - rate
        return self.notional * np.maximum(diff, 0.0)


@dataclass(frozen=True)
class Instrument:
    payoff: Callable[[np.ndarray], np.ndarray]
    price: float
    moneyness: float = math.nan

    @property
    def name(self) -> str:
        return getattr(self.payoff, "name", repr(self.payoff))


@dataclass(frozen=True)
class InstrumentBook:
    """Quoted source instruments and held-out targets on one underlying.

    ``underlying`` holds the process kind (``"gbm"`` or ``"vasicek"``), its
    parameters and the horizon to simulate.
    """

    sources: tuple[Instrument, ...]
    targets: tuple[Instrument, ...]
    kind: str
    params: dict = field(default_factory=dict)
    horizon: float = 1.0
    label: str = ""

    def __post_init__(self):
        if not self.sources:
            raise ValueError("book needs at least one source instrument")
        bad = [s.name for s in self.sources if not (s.price > 0 and math.isfinite(s.price))]
        if bad:
            raise ValueError(f"source prices must be strictly positive: {', '.join(bad)}")
        if self.kind not in ("gbm", "vasicek"):
            raise ValueError(f"underlying kind must be 'gbm' or 'vasicek', got {self.kind!r}")
        check_real(self.horizon, "horizon", lower=0.0, lower_open=True)

    def process(self, dt: float) -> ProcessSpec:
        n = int(round(self.horizon / dt))
        if n < 1 or abs(n * dt - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ValueError(f"horizon {self.horizon} is not a whole number of steps of {dt}")
        return ProcessSpec(self.kind, CorrelationSpec.equicorrelated(1), self.horizon, n, dict(self.params))

    def duplicated(self) -> "InstrumentBook":
        """Same book with the targets replaced by copies of the sources."""
        return InstrumentBook(self.sources, self.sources, self.kind, self.params, self.horizon, self.label + "-dup")


def stock_book(
    S0: float = 100.0,
    r: float = 0.02,
    q_div: float = 0.0,
    vol: float = 0.2,
    T: float = 2.5,
    source_strikes: Sequence[float] = tuple(range(90, 111, 2)),
    target_strikes: Sequence[float] = tuple(range(91, 110, 2)),
) -> InstrumentBook:
    """European calls and puts under risk-neutral GBM, priced by BSM."""

    def leg(strikes):
        out = []
        for kind in ("call", "put"):
            for K in strikes:
                out.append(Instrument(Payoff(kind, float(K)), bsm_price(kind, S0, K, r, q_div, vol, T), K / S0))
        return tuple(out)

    params = {"drift": r - q_div, "vol": vol, "x0": S0}
    return InstrumentBook(leg(source_strikes), leg(target_strikes), "gbm", params, T, "stock")


def rate_book(
    model: VasicekModel = VasicekModel(),
    notional: float = 100.0,
    fixing: float = 0.5,
    tenor: float = 0.5,
    source_strikes: Sequence[float] = tuple(np.round(np.arange(250, 351, 10) / 1e4, 6)),
    target_strikes: Sequence[float] = tuple(np.round(np.arange(255, 346, 10) / 1e4, 6)),
) -> InstrumentBook:
    """Vasicek caplets and floorlets; the simulated path runs to the fixing date."""

    def leg(strikes):
        out = []
        for kind in ("caplet", "floorlet"):
            for K in strikes:
                price = vasicek_caplet_floorlet(kind, notional, model.r0, model.gamma, model.rbar, model.sigma, K, fixing, tenor)
                out.append(Instrument(RatePayoff(kind, float(K), model, notional, tenor), price, float(K)))
        return tuple(out)

    params = {"gamma": model.gamma, "rbar": model.rbar, "sigma": model.sigma, "r0": model.r0}
    return InstrumentBook(leg(source_strikes), leg(target_strikes), "vasicek", params, fixing, "rate")


# ---------------------------------------------------------------- pricing pipeline


class RankDeficientError(ValueError):
    """The source-coefficient regression cannot identify signature prices."""


@dataclass(frozen=True)
class PipelineConfig:
    n_paths: int = 1000
    dt: float = 1.0 / 252.0
    K: int = 4
    cv_folds: int = 5
    convention: str = "ito"
    augment_time: bool = False
    n_alphas: int = 100
    rank_tol: float = 1e-10
    threads: int = 1

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        check_int(self.n_paths, "n_paths", minimum=self.cv_folds)
        check_int(self.K, "K", minimum=0)
        check_real(self.dt, "dt", lower=0.0, lower_open=True)


@dataclass(frozen=True)
class SigDerivPrices:
    """Estimated prices of the signature components, NaN where unidentified."""

    indexing: WordIndexing
    values: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.indexing.labels, map(float, self.values)))


@dataclass(frozen=True)
class PricingResult:
    sig_prices: SigDerivPrices
    source_coefs: np.ndarray
    target_coefs: np.ndarray
    estimates: np.ndarray
    true_prices: np.ndarray
    target_names: tuple[str, ...]
    moneyness: np.ndarray
    penalties: np.ndarray

    @property
    def relative_errors(self) -> np.ndarray:
        return np.abs(self.estimates - self.true_prices) / self.true_prices

    @property
    def mean_relative_error(self) -> float:
        return float(self.relative_errors.mean())

    def rows(self) -> list[dict]:
        return [
            {"instrument": n, "moneyness": k, "true_price": p, "estimated_price": e, "relative_error": r}
            for n, k, p, e, r in zip(self.target_names, self.moneyness, self.true_prices, self.estimates, self.relative_errors)
        ]

    def to_csv(self) -> str:
        return rows_to_csv(self.rows())


def _ci(values, batches: int) -> tuple[float, float]:
    """Batch-means CI, or a NaN half-width when there are too few values."""
    values = np.asarray(values, float)
    b = min(batches, values.size)
    if b < 2:
        return float(np.mean(values)), math.nan
    mean, half, _ = with_confidence(values, b)
    return mean, half


def _fit_coefs(S, y, config: PipelineConfig, fold_seed) -> tuple[np.ndarray, float]:
    model = LassoPathCV(cv=config.cv_folds, n_alphas=config.n_alphas, random_state=np.random.default_rng(fold_seed))
    model.fit(S, y)
    return model.coef_, model.lam_


def solve_signature_prices(a: np.ndarray, prices: np.ndarray, rank_tol: float = 1e-10) -> np.ndarray:
    """Least-squares signature prices from source coefficients.

    Words whose coefficient is zero for every source are unidentified and
    come back as NaN. The remaining columns must have rank
    ``min(m, n_identified)``; with fewer sources than identified words the
    minimum-norm solution interpolates the quotes exactly.
    """
    a = np.asarray(a, float)
    prices = np.asarray(prices, float)
    cols = np.flatnonzero(np.any(a != 0.0, axis=0))
    out = np.full(a.shape[1], np.nan)
    if cols.size == 0:
        raise RankDeficientError("source coefficient matrix a is identically zero")
    sub = a[:, cols]
    sv = np.linalg.svd(sub, compute_uv=False)
    rank = int(np.sum(sv > rank_tol * sv[0]))
    need = min(sub.shape)
    if rank < need:
        raise RankDeficientError(
            f"source coefficient matrix a ({sub.shape[0]} sources x {sub.shape[1]} identified words) "
            f"has rank {rank} < {need}"
        )
    out[cols] = np.linalg.lstsq(sub, prices, rcond=None)[0]
    return out


def price_targets(book: InstrumentBook, config: PipelineConfig = PipelineConfig(), stream: SeededStream | int = 0) -> PricingResult:
    """Run the six pricing steps once.

    (i) simulate the underlying; (ii) evaluate all payoffs; (iii) compute
    signatures; (iv) fit each payoff on the signature by cross-validated
    Lasso; (v) least squares of source quotes on their coefficients gives
    the signature prices; (vi) price the targets with their coefficients.
    """
    if not isinstance(stream, SeededStream):
        stream = SeededStream(int(stream))
    spec = book.process(config.dt)
    paths = simulate_paths(spec, stream.child(0), config.n_paths)
    A = np.column_stack([s.payoff(paths) for s in book.sources])
    B = np.column_stack([t.payoff(paths) for t in book.targets])
    feats = augment_batch(paths, spec.times) if config.augment_time else paths
    S = signature_batch(feats, config.K, config.convention)
    fold_seed = stream.child(1).generator().integers(2**63)
    Y = np.column_stack([A, B])

    def fit(j):
        return _fit_coefs(S, Y[:, j], config, fold_seed)

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            fits = list(pool.map(fit, range(Y.shape[1])))
    else:
        fits = [fit(j) for j in range(Y.shape[1])]
    coefs = np.array([f[0] for f in fits])
    lams = np.array([f[1] for f in fits])
    m = len(book.sources)
    a, b = coefs[:m], coefs[m:]
    src_prices = np.array([s.price for s in book.sources])
    pS = solve_signature_prices(a, src_prices, config.rank_tol)
    est = b @ np.nan_to_num(pS)
    d = spec.d + (1 if config.augment_time else 0)
    return PricingResult(
        SigDerivPrices(WordIndexing(d, config.K), pS),
        a,
        b,
        est,
        np.array([t.price for t in book.targets]),
        tuple(t.name for t in book.targets),
        np.array([t.moneyness for t in book.targets]),
        lams,
    )


def price_with_coefficients(coefs, sig_prices) -> np.ndarray:
    """Step (vi) alone: prices of payoffs with known signature coefficients."""
    return np.asarray(coefs, float) @ np.nan_to_num(np.asarray(sig_prices, float))


@dataclass
class PricingExperiment:
    book: str
    conventions: tuple[str, ...]
    errors: dict[str, np.ndarray]
    per_target: dict[str, np.ndarray]
    moneyness: np.ndarray
    target_names: tuple[str, ...]
    batches: int
    provenance: dict

    def summary(self) -> list[dict]:
        rows = []
        for c in self.conventions:
            mean, half = _ci(self.errors[c], self.batches)
            rows.append({"book": self.book, "convention": c, "mean_relative_error": mean, "ci_half_width": half, "max_rep_error": float(self.errors[c].max())})
        return rows

    def difference(self, first: str, second: str) -> tuple[float, float]:
        """Mean and CI half-width of the paired per-repetition difference ``first - second``."""
        return _ci(self.errors[first] - self.errors[second], self.batches)

    def target_rows(self) -> list[dict]:
        rows = []
        for c in self.conventions:
            err = self.per_target[c]
            for j, name in enumerate(self.target_names):
                rows.append({"convention": c, "instrument": name, "moneyness": self.moneyness[j], "mean_relative_error": float(err[:, j].mean())})
        return rows


def pricing_experiment(
    book: InstrumentBook,
    config: PipelineConfig = PipelineConfig(),
    conventions: Sequence[str] = ("ito", "stratonovich"),
    reps: int = 20,
    seed: int = 0,
    batches: int = 5,
) -> PricingExperiment:
    """Repeat :func:`price_targets`; conventions share paths within a repetition."""
    t0 = time.perf_counter()
    reps = check_int(reps, "reps", minimum=1)
    errors = {c: np.empty(reps) for c in conventions}
    per_target = {c: np.empty((reps, len(book.targets))) for c in conventions}
    for i in range(reps):
        stream = SeededStream(seed, i)
        for c in conventions:
            res = price_targets(book, replace(config, convention=c), stream)
            errors[c][i] = res.mean_relative_error
            per_target[c][i] = res.relative_errors
    prov = {"seed": seed, "reps": reps, "version": __version__, "wall_clock_s": time.perf_counter() - t0, "config": asdict(config)}
    return PricingExperiment(book.label, tuple(conventions), errors, per_target, res.moneyness, res.target_names, batches, prov)


# ---------------------------------------------------------------- payoff learning


@dataclass(frozen=True)
class PredictorSet:
    """Regression features built from paths.

    ``sig`` uses signature components up to order ``K``; ``rsam`` and
    ``usam`` use the same number of raw path values, at random or equally
    spaced grid indices. For ``d > 1`` the sampled columns are split as
    evenly as possible across coordinates.
    """

    kind: str
    K: int = 6
    convention: str = "stratonovich"

    def __post_init__(self):
        if self.kind not in PREDICTOR_KINDS:
            raise ValueError(f"predictor kind must be one of {PREDICTOR_KINDS}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        check_int(self.K, "K", minimum=1)

    @property
    def name(self) -> str:
        return f"sig-{self.convention}" if self.kind == "sig" else self.kind

    def n_columns(self, d: int) -> int:
        return word_count(d, self.K)

    def design(self, paths, rng: np.random.Generator | None = None) -> np.ndarray:
        X = check_paths(paths)
        m, n1, d = X.shape
        if self.kind == "sig":
            return signature_batch(X, self.K, self.convention)
        p = self.n_columns(d)
        counts = [p // d + (1 if c < p % d else 0) for c in range(d)]
        if max(counts) > n1:
            raise ValueError(f"cannot sample {max(counts)} distinct points from a grid of {n1}")
        cols = []
        for c, k in enumerate(counts):
            if self.kind == "usam":
                idx = np.round(np.linspace(0, n1 - 1, k)).astype(int) if k > 1 else np.array([n1 - 1])
            else:
                if rng is None:
                    raise ValueError("rsam needs a random generator")
                idx = np.sort(rng.choice(n1, size=k, replace=False))
            cols.append(X[:, idx, c])
        return np.concatenate(cols, axis=1)


def fit_centered_path(X_train, y_train):
    """Lasso path with an unpenalised intercept; constant columns are dropped.

    Returns ``(path, keep, x_mean, scale, y_mean)``.
    """
    xm = X_train.mean(axis=0)
    Xc = X_train - xm
    spread = np.sqrt(np.mean(Xc * Xc, axis=0))
    keep = np.flatnonzero(spread > 1e-12 * np.maximum(1.0, np.abs(xm)))
    Xc = Xc[:, keep]
    scale = mean_square_scales(Xc)
    ym = float(y_train.mean())
    return lasso_path(Xc / scale, y_train - ym), keep, xm[keep], scale, ym


def _ratio_predictions(fit, X, ratios):
    path, keep, xm, scale, ym = fit
    beta = path.coefs_at(ratios * path.lambda_max)
    return ym + ((X[:, keep] - xm) / scale) @ beta.T, beta


@dataclass(frozen=True)
class LearningConfig:
    payoffs: tuple[Payoff, ...] = field(default_factory=learning_payoffs)
    predictors: tuple[PredictorSet, ...] = (PredictorSet("sig"), PredictorSet("rsam"), PredictorSet("usam"))
    ratios: tuple[float, ...] = tuple(np.geomspace(1.0, 1e-6, 25))
    n_train: int = 200
    n_test: int = 100
    reps: int = 200
    steps: int = 1000
    vol: float = 0.01
    rho: float = 0.6
    seed: int = 0
    batches: int = 10
    augment_time: bool = False


@dataclass
class LearningResult:
    payoffs: tuple[str, ...]
    predictors: tuple[str, ...]
    ratios: np.ndarray
    r2_in: np.ndarray  # (payoff, predictor, rep, ratio)
    r2_out: np.ndarray
    sig_coefs: dict  # payoff name -> (rep, ratio, p) standardized coefficients of the first sig predictor
    sig_labels: dict
    batches: int
    provenance: dict

    def mean_curves(self, which: str = "out") -> np.ndarray:
        arr = self.r2_out if which == "out" else self.r2_in
        return np.nanmean(arr, axis=2)

    def best(self) -> list[dict]:
        """Best penalty (by mean out-of-sample R^2) per payoff and predictor."""
        rows = []
        curves = self.mean_curves("out")
        for i, pay in enumerate(self.payoffs):
            for j, pred in enumerate(self.predictors):
                k = int(np.nanargmax(curves[i, j]))
                vals = self.r2_out[i, j, :, k]
                mean, half = _ci(vals, self.batches)
                rows.append({"payoff": pay, "predictor": pred, "best_ratio": float(self.ratios[k]), "r2_out": mean, "ci_half_width": half, "r2_in": float(np.nanmean(self.r2_in[i, j, :, k]))})
        return rows

    def curve_rows(self) -> list[dict]:
        rows = []
        ci, co = self.mean_curves("in"), self.mean_curves("out")
        for i, pay in enumerate(self.payoffs):
            for j, pred in enumerate(self.predictors):
                for k, r in enumerate(self.ratios):
                    rows.append({"payoff": pay, "predictor": pred, "lambda_ratio": float(r), "r2_in": float(ci[i, j, k]), "r2_out": float(co[i, j, k])})
        return rows

    def coefficient_rows(self, top: int | None = None) -> list[dict]:
        """Mean standardized sig coefficients along the grid with 90% batch CIs.

        For 2-d payoffs ``top`` defaults to 7 words, chosen by the largest
        mean absolute coefficient at the smallest penalty.
        """
        rows = []
        for pay, C in self.sig_coefs.items():
            labels = self.sig_labels[pay]
            mean = C.mean(axis=0)
            n_top = top if top is not None else (7 if len(labels) > 7 * 2 else len(labels))
            order = np.argsort(-np.abs(mean[-1]))[:n_top]
            for w in order:
                for k, r in enumerate(self.ratios):
                    m, half = _ci(C[:, k, w], self.batches)
                    rows.append({"payoff": pay, "word": labels[w], "lambda_ratio": float(r), "coef": m, "ci_half_width": half})
        return rows


def _payoff_view(paths, payoff) -> np.ndarray:
    return paths[:, :, : payoff.d]


def payoff_learning(config: LearningConfig = LearningConfig()) -> LearningResult:
    """R^2 of Lasso payoff fits against the relative penalty ``lambda / lambda_max``.

    Each repetition simulates one batch of correlated GBM pairs shared by
    all payoffs; 1-d payoffs use the first asset. Intercepts are fitted
    without penalty, so a constant ``S()`` column is dropped.
    """
    t0 = time.perf_counter()
    cfg = config
    ratios = np.asarray(cfg.ratios, float)
    P, Q, R, G = len(cfg.payoffs), len(cfg.predictors), cfg.reps, ratios.size
    r2_in = np.full((P, Q, R, G), np.nan)
    r2_out = np.full((P, Q, R, G), np.nan)
    sig_q = next((j for j, p in enumerate(cfg.predictors) if p.kind == "sig"), None)
    sig_coefs, sig_labels = {}, {}
    n = cfg.n_train
    times = np.linspace(0.0, 1.0, cfg.steps + 1)
    for rep in range(R):
        stream = SeededStream(cfg.seed, rep)
        paths = gbm_pair_paths(cfg.rho, cfg.vol, cfg.steps, stream.child(0), cfg.n_train + cfg.n_test)
        rng = stream.child(1).generator()
        designs = {}
        for i, pay in enumerate(cfg.payoffs):
            view = _payoff_view(paths, pay)
            y = pay(view)
            feats = augment_batch(view, times) if cfg.augment_time else view
            for j, pred in enumerate(cfg.predictors):
                key = (feats.shape[2], j)
                if key not in designs:
                    designs[key] = pred.design(feats, rng)
                X = designs[key]
                fit = fit_centered_path(X[:n], y[:n])
                pred_tr, beta = _ratio_predictions(fit, X[:n], ratios)
                pred_te, _ = _ratio_predictions(fit, X[n:], ratios)
                ytr, yte = y[:n], y[n:]
                ss_tr = np.sum((ytr - ytr.mean()) ** 2)
                ss_te = np.sum((yte - yte.mean()) ** 2)
                if ss_tr > 0:
                    r2_in[i, j, rep] = 1.0 - np.sum((ytr[:, None] - pred_tr) ** 2, axis=0) / ss_tr
                if ss_te > 0:
                    r2_out[i, j, rep] = 1.0 - np.sum((yte[:, None] - pred_te) ** 2, axis=0) / ss_te
                if j == sig_q:
                    full = np.zeros((G, X.shape[1]))
                    full[:, fit[1]] = beta
                    sig_coefs.setdefault(pay.name, np.zeros((R, G, X.shape[1])))[rep] = full
                    if pay.name not in sig_labels:
                        sig_labels[pay.name] = WordIndexing(feats.shape[2], pred.K).labels
    prov = {"seed": cfg.seed, "reps": R, "version": __version__, "wall_clock_s": time.perf_counter() - t0}
    return LearningResult(
        tuple(p.name for p in cfg.payoffs),
        tuple(p.name for p in cfg.predictors),
        ratios,
        r2_in,
        r2_out,
        sig_coefs,
        sig_labels,
        cfg.batches,
        prov,
    )


@dataclass(frozen=True)
class ConventionConfig:
    K: int = 6
    conventions: tuple[str, ...] = CONVENTIONS
    kappa: float = 1.0
    n_train: int = 200
    n_test: int = 100
    reps: int = 200
    steps: int = 1000
    T: float = 1.0
    ratios: tuple[float, ...] = tuple(np.geomspace(1.0, 1e-6, 25))
    seed: int = 0
    batches: int = 10


def compare_conventions(config: ConventionConfig = ConventionConfig()) -> list[dict]:
    """Out-of-sample R^2 of ``max(X_T, 0)`` fits for BM and OU by signature convention.

    Conventions share paths within a repetition. Each row reports the best
    mean R^2 over the penalty grid, its CI, and for ``linear`` the paired
    gap to ``stratonovich`` at that penalty.
    """
    cfg = config
    ratios = np.asarray(cfg.ratios, float)
    rows = []
    for process, kappa in (("brownian", 0.0), ("ou", cfg.kappa)):
        params = {"kappa": kappa} if process == "ou" else {}
        spec = ProcessSpec(process, CorrelationSpec.equicorrelated(1), cfg.T, cfg.steps, params)
        r2 = {c: np.full((cfg.reps, ratios.size), np.nan) for c in cfg.conventions}
        for rep in range(cfg.reps):
            paths = simulate_paths(spec, SeededStream(cfg.seed, rep).child(0), cfg.n_train + cfg.n_test)
            y = np.maximum(paths[:, -1, 0], 0.0)
            n = cfg.n_train
            for c in cfg.conventions:
                X = signature_batch(paths, cfg.K, c)
                fit = fit_centered_path(X[:n], y[:n])
                pred, _ = _ratio_predictions(fit, X[n:], ratios)
                yte = y[n:]
                r2[c][rep] = 1.0 - np.sum((yte[:, None] - pred) ** 2, axis=0) / np.sum((yte - yte.mean()) ** 2)
        for c in cfg.conventions:
            k = int(np.nanargmax(np.nanmean(r2[c], axis=0)))
            mean, half = _ci(r2[c][:, k], cfg.batches)
            row = {"process": process, "kappa": kappa, "convention": c, "best_ratio": float(ratios[k]), "r2_out": mean, "ci_half_width": half}
            if c == "linear" and "stratonovich" in r2:
                gap, gap_half = _ci(r2["linear"][:, k] - r2["stratonovich"][:, k], cfg.batches)
                row.update(gap_to_stratonovich=gap, gap_ci_half_width=gap_half)
            rows.append(row)
    return rows
