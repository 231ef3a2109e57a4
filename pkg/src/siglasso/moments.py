"""Moment and correlation matrices of signature components.

Analytic routes

* Ito signature of correlated Brownian motion: zero means above order 0 and a
  block diagonal second-moment matrix whose order-``n`` block is
  ``T**n / n! * C^{(x)n}`` with ``C = Gamma Gamma^T``.
* Stratonovich signature of correlated Brownian motion: exact second moments
  from a recursion on piecewise bivariate polynomials (see
  :class:`StratonovichBMRecursion`).
* One-dimensional OU, correlation between the order-0 and order-2 components.

Everything else is estimated by Monte Carlo with :func:`mc_signature_moments`.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._validation import check_int, check_real
from .bipoly import PiecewiseBivariatePoly
from .processes import CorrelationSpec, ProcessSpec, SeededStream, simulate_paths
from .signature import augment_batch, signature_batch
from .words import Word, WordIndexing, enumerate_words

# paths per random block in Monte Carlo estimators; fixed so that results do
# not depend on the thread count
MC_BLOCK = 2048


@dataclass(frozen=True)
class MomentMatrix:
    """Uncentered second moments (or their correlation normalisation).

    Attributes
    ----------
    indexing : WordIndexing
    values : ndarray, shape (p, p)
    kind : {"covariance", "correlation"}
    first_moments : ndarray, shape (p,)
    """

    indexing: WordIndexing
    values: np.ndarray
    kind: str
    first_moments: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        p = len(self.indexing)
        if values.shape != (p, p):
            raise ValueError(f"moment matrix must be {p}x{p}, got {values.shape}")
        if self.kind not in ("covariance", "correlation"):
            raise ValueError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "first_moments", np.asarray(self.first_moments, dtype=np.float64))

    @property
    def orders(self) -> np.ndarray:
        return self.indexing.orders

    def correlation(self) -> "MomentMatrix":
        if self.kind == "correlation":
            return self
        diag = np.sqrt(np.diag(self.values))
        if np.any(diag == 0):
            raise ValueError("a component has zero second moment; correlation undefined")
        R = self.values / np.outer(diag, diag)
        R = 0.5 * (R + R.T)
        np.fill_diagonal(R, 1.0)
        return MomentMatrix(self.indexing, R, "correlation", self.first_moments)

    def parity_permutation(self) -> np.ndarray:
        """Index permutation listing odd-order words first, then even-order words."""
        orders = self.orders
        return np.concatenate([np.flatnonzero(orders % 2 == 1), np.flatnonzero(orders % 2 == 0)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        labels = self.indexing.labels
        w.writerow(["word"] + labels)
        for lab, row in zip(labels, self.values):
            w.writerow([lab] + [format(float(v), ".17g") for v in row])
        return buf.getvalue()

    def to_long(self) -> str:
        """Heatmap-ready ``row_word, col_word, value`` rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row_word", "col_word", "value"])
        labels = self.indexing.labels
        for i, a in enumerate(labels):
            for j, b in enumerate(labels):
                w.writerow([a, b, format(float(self.values[i, j]), ".17g")])
        return buf.getvalue()


def _as_covariance(corr) -> np.ndarray:
    if isinstance(corr, CorrelationSpec):
        return corr.covariance
    return np.atleast_2d(np.asarray(corr, dtype=np.float64))


def ito_bm_moments(corr: CorrelationSpec, K: int, T: float = 1.0) -> MomentMatrix:
    """Exact moments of the Ito signature of ``X = Gamma W``.

    Returns the uncentered second-moment matrix; call ``.correlation()`` for
    ``diag{1, Omega, Omega (x) Omega, ...}``.
    """
    K = check_int(K, "K", minimum=0)
    T = check_real(T, "T", lower=0.0, lower_open=True)
    C = _as_covariance(corr)
    d = C.shape[0]
    idx = enumerate_words(d, K)
    M = np.zeros((len(idx), len(idx)))
    block = np.ones((1, 1))
    for n in range(K + 1):
        if n > 0:
            # word (u, i) sits at idx(u) + d**(n-1) * (i-1): the last letter is most significant
            block = np.kron(C, block)
        sl = idx.block(n)
        M[sl, sl] = T**n / math.factorial(n) * block
    first = np.zeros(len(idx))
    first[0] = 1.0
    return MomentMatrix(idx, M, "covariance", first)


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    # decimal reading of the shortest round-trip repr, so 0.6 becomes 3/5
    return Fraction(repr(float(x)))


class StratonovichBMRecursion:
    """Exact ``E[S_u(l) S_v(t)]`` for the Stratonovich signature of ``Gamma W``.

    With ``C = Gamma Gamma^T`` and ``v = v' j`` the Stratonovich integral
    splits into an Ito part and a drift,
    ``S_v(t) = int_0^t S_{v'} dX^j + 1/2 C[v'_last, j] int_0^t S_{v'-}(s) ds``,
    where ``v'-`` drops the last letter of ``v'``.  Writing
    ``F(u, v)(l, t) = E[S_u(l) S_v(t)]`` and ``G(u, v)(l, t)`` for the
    correlation of ``S_u(l)`` with the Ito part of ``S_v(t)``:

    ``F(u, v) = G(u, v) + 1/2 C[v'_last, j] int_0^t F(u, v'-)(l, s) ds``

    ``G(u, v) = C[i, j] int_0^{l^t} F(u', v')(s, s) ds
    + 1/2 C[u'_last, i] int_0^l G(u'-, v)(r, t) dr``  for ``u = u' i``

    with ``F((), ()) = 1``, ``G((), v) = 0`` and the drift terms absent when the
    prefix is empty.  Pairs of different parity vanish identically.
    """

    def __init__(self, covariance):
        C = np.atleast_2d(np.asarray(covariance, dtype=np.float64))
        if C.shape[0] != C.shape[1]:
            raise ValueError("covariance must be square")
        self.d = C.shape[0]
        self.C = [[_to_fraction(C[i, j]) for j in range(self.d)] for i in range(self.d)]
        self._F: dict[tuple[Word, Word], PiecewiseBivariatePoly] = {}
        self._G: dict[tuple[Word, Word], PiecewiseBivariatePoly] = {}

    def _c(self, i: int, j: int) -> Fraction:
        return self.C[i - 1][j - 1]

    def F(self, u: Word, v: Word) -> PiecewiseBivariatePoly:
        key = (u, v)
        if key in self._F:
            return self._F[key]
        if (len(u) + len(v)) % 2:
            res = PiecewiseBivariatePoly.zero()
        elif not u and not v:
            res = PiecewiseBivariatePoly.constant(1)
        elif not v:
            res = self.F(v, u).swap()
        else:
            res = self.G(u, v)
            vp, j = v[:-1], v[-1]
            if vp:
                c = self._c(vp[-1], j)
                if c != 0:
                    res = res + self.F(u, vp[:-1]).int_second().scale(c / 2)
        self._F[key] = res
        return res

    def G(self, u: Word, v: Word) -> PiecewiseBivariatePoly:
        key = (u, v)
        if key in self._G:
            return self._G[key]
        if not u or (len(u) + len(v)) % 2:
            res = PiecewiseBivariatePoly.zero()
        else:
            up, i = u[:-1], u[-1]
            vp, j = v[:-1], v[-1]
            res = PiecewiseBivariatePoly.zero()
            cij = self._c(i, j)
            if cij != 0:
                res = self.F(up, vp).diag_integral().scale(cij)
            if up:
                c = self._c(up[-1], i)
                if c != 0:
                    res = res + self.G(up[:-1], v).int_first().scale(c / 2)
        self._G[key] = res
        return res


def _check_words(d: int, *words: Word):
    for w in words:
        if any(not 1 <= i <= d for i in w):
            raise ValueError(f"word {w!r} has letters outside 1..{d}")


def strat_bm_moment_functions(corr: CorrelationSpec, words: tuple[Word, Word]) -> PiecewiseBivariatePoly:
    """``(l, t) -> E[S_w(l) S_v(t)]`` for the Stratonovich signature of correlated BM."""
    w, v = (tuple(int(i) for i in x) for x in words)
    C = _as_covariance(corr)
    _check_words(C.shape[0], w, v)
    if (len(w) + len(v)) % 2:
        raise ValueError(f"words {w} and {v} have different parity; their second moment is identically 0")
    return StratonovichBMRecursion(C).F(w, v)


def strat_bm_moments(corr: CorrelationSpec, K: int, T: float = 1.0, *, exact: bool = False):
    """Exact moments of the Stratonovich signature of ``X = Gamma W``.

    Parameters
    ----------
    exact : bool, default=False
        Also return the Fraction-valued matrices.
    """
    K = check_int(K, "K", minimum=0)
    C = _as_covariance(corr)
    rec = StratonovichBMRecursion(C)
    idx = enumerate_words(C.shape[0], K)
    Tq = _to_fraction(T)
    if Tq <= 0:
        raise ValueError("T must be positive")
    p = len(idx)
    second = [[Fraction(0)] * p for _ in range(p)]
    for a, w in enumerate(idx.words):
        for b in range(a, p):
            v = idx.words[b]
            if (len(w) + len(v)) % 2 == 0:
                second[a][b] = second[b][a] = rec.F(w, v)(Tq, Tq)
    first = [rec.F((), w)(Tq, Tq) for w in idx.words]
    M = MomentMatrix(idx, np.array(second, dtype=float), "covariance", np.array(first, dtype=float))
    if exact:
        return M, second, first
    return M


def strat_bm_mean(word: Word, corr, T) -> float:
    """Closed-form mean of a Stratonovich BM component: 0 for odd words."""
    C = _as_covariance(corr)
    k = len(word)
    if k % 2:
        return 0.0
    n = k // 2
    prod = 1.0
    for a in range(n):
        prod *= C[word[2 * a] - 1, word[2 * a + 1] - 1]
    return prod * T**n / (2**n * math.factorial(n))


def ou_1d_order0_order2_corr(kappa: float, T: float = 1.0, convention: str = "ito") -> float:
    """Correlation of ``S^()`` and ``S^(1,1)`` for a 1-d OU process started at 0.

    For the Ito convention, with ``x = 2 kappa T`` and ``u = 1 - exp(-x)``,
    the value is ``(u - x) / sqrt((x - u)**2 + 2 u**2)``, an algebraically
    equivalent form of the expanded closed form that stays accurate as
    ``kappa -> 0``.  The Stratonovich value is ``1/sqrt(3)``.
    """
    kappa = check_real(kappa, "kappa", lower=0.0, lower_open=True)
    T = check_real(T, "T", lower=0.0, lower_open=True)
    if convention == "stratonovich":
        return math.sqrt(3.0) / 3.0
    if convention != "ito":
        raise ValueError(f"convention must be 'ito' or 'stratonovich', got {convention!r}")
    x = 2.0 * kappa * T
    u = -math.expm1(-x)
    if x < 1e-4:
        # u - x = -x**2/2 + x**3/6 - x**4/24 + ...
        diff = -x * x / 2.0 + x**3 / 6.0 - x**4 / 24.0
    else:
        diff = u - x
    return diff / math.sqrt(diff * diff + 2.0 * u * u)


def ou_1d_order0_order2_corr_expanded(kappa: float, T: float = 1.0) -> float:
    """The Ito closed form exactly as expanded, for cross-checking."""
    e2, e4 = math.exp(-2 * kappa * T), math.exp(-4 * kappa * T)
    num = -2 * kappa * T - e2 + 1
    den = 4 * kappa * T * e2 + 3 * e4 - 6 * e2 - 4 * kappa * T + 3 + 4 * kappa**2 * T**2
    return num / math.sqrt(den)


def ou_1d_ito_mean_order2(kappa: float, T: float = 1.0) -> float:
    """``E[S^(1,1)]`` of the Ito signature of a 1-d OU process from 0."""
    return -T / 2 + (1 - math.exp(-2 * kappa * T)) / (4 * kappa)


def ou_variance(kappa: float, t: float) -> float:
    """``Var(Y_t)`` for the OU process from 0 with unit volatility."""
    if kappa == 0:
        return t
    return -math.expm1(-2 * kappa * t) / (2 * kappa)


def mc_signature_moments(
    spec: ProcessSpec,
    K: int,
    convention: str,
    trials: int,
    stream: SeededStream,
    *,
    augment_time: bool = False,
    threads: int = 1,
) -> MomentMatrix:
    """Plain-average Monte Carlo estimate of the uncentered moments.

    Paths are drawn in fixed blocks of ``MC_BLOCK`` from child streams
    ``stream.child(b)`` and partial sums are reduced in block order, so the
    estimate does not depend on ``threads``.
    """
    trials = check_int(trials, "trials", minimum=2)
    d = spec.d + (1 if augment_time else 0)
    idx = enumerate_words(d, K)
    sizes = [min(MC_BLOCK, trials - s) for s in range(0, trials, MC_BLOCK)]

    def block(b: int):
        paths = simulate_paths(spec, stream.child(b), sizes[b])
        if augment_time:
            paths = augment_batch(paths, spec.times)
        S = signature_batch(paths, K, convention)
        return S.T @ S, S.sum(axis=0)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(block, range(len(sizes))))
    else:
        parts = [block(b) for b in range(len(sizes))]
    second = np.zeros((len(idx), len(idx)))
    first = np.zeros(len(idx))
    for s2, s1 in parts:
        second += s2
        first += s1
    second /= trials
    second = 0.5 * (second + second.T)
    return MomentMatrix(idx, second, "covariance", first / trials)


def kronecker_correlation(omega, K: int) -> np.ndarray:
    """``diag{1, Omega, Omega (x) Omega, ..., Omega^{(x)K}}`` in recursive order."""
    omega = np.atleast_2d(np.asarray(omega, dtype=np.float64))
    d = omega.shape[0]
    idx = enumerate_words(d, K)
    out = np.zeros((len(idx), len(idx)))
    block = np.ones((1, 1))
    for n in range(K + 1):
        if n:
            block = np.kron(omega, block)
        sl = idx.block(n)
        out[sl, sl] = block
    return out
