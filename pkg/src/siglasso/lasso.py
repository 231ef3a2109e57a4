"""Lasso on signature designs.

The objective is the un-normalised ``||y - X b||^2 + lam * ||b||_1`` with every
column penalised, including the constant order-0 column.  :func:`lasso_path`
follows the exact piecewise linear solution path (LARS with the Lasso drop
step); :func:`lasso_coordinate_descent` solves the same objective on a fixed
grid.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_finite_matrix, check_int


class DegenerateColumnError(ValueError):
    """A design column is identically zero."""


@dataclass(frozen=True)
class DesignMatrix:
    """Columns scaled to unit mean square, with the scale factors kept."""

    values: np.ndarray
    scales: np.ndarray
    labels: tuple[str, ...] | None = None

    @property
    def shape(self):
        return self.values.shape

    def to_standard_beta(self, beta) -> np.ndarray:
        """``beta_tilde = scale * beta``."""
        return np.asarray(beta, float) * self.scales

    def to_raw_beta(self, beta_tilde) -> np.ndarray:
        return np.asarray(beta_tilde, float) / self.scales


def mean_square_scales(X, labels=None) -> np.ndarray:
    X = check_finite_matrix(X, name="design")
    scales = np.sqrt(np.mean(X * X, axis=0))
    zero = np.flatnonzero(scales == 0)
    if zero.size:
        names = [labels[j] if labels is not None else f"column {j}" for j in zero]
        raise DegenerateColumnError(f"all-zero design column(s): {', '.join(map(str, names))}")
    return scales


def standardize(X, labels=None) -> DesignMatrix:
    """Divide each column by the square root of its mean square."""
    X = check_finite_matrix(X, name="design")
    scales = mean_square_scales(X, labels)
    return DesignMatrix(X / scales, scales, tuple(labels) if labels is not None else None)


class MeanSquareScaler(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`standardize` (no centering)."""

    def fit(self, X, y=None):
        self.scale_ = mean_square_scales(X)
        self.n_features_in_ = self.scale_.size
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_finite_matrix(X, name="X")
        return X / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "scale_")
        return np.asarray(X, float) * self.scale_


@dataclass(frozen=True)
class LassoPath:
    """Breakpoints of the solution path, largest penalty first.

    ``lambdas[0]`` is the smallest penalty at which all coefficients vanish;
    coefficients are linear in ``lambda`` between consecutive breakpoints.
    """

    lambdas: np.ndarray
    coefs: np.ndarray
    events: tuple[str, ...] = field(default=(), compare=False)

    @property
    def n_features(self) -> int:
        return self.coefs.shape[1]

    @property
    def lambda_max(self) -> float:
        return float(self.lambdas[0])

    def coef_at(self, lam: float) -> np.ndarray:
        """Coefficients at penalty ``lam`` by interpolation along the path."""
        lams = self.lambdas
        if lam >= lams[0]:
            return np.zeros(self.n_features) if lam > lams[0] else self.coefs[0].copy()
        if lam <= lams[-1]:
            return self.coefs[-1].copy()
        # lambdas are decreasing
        k = int(np.searchsorted(-lams, -lam, side="right"))
        lo, hi = lams[k - 1], lams[k]
        w = (lo - lam) / (lo - hi)
        return (1 - w) * self.coefs[k - 1] + w * self.coefs[k]

    def coefs_at(self, lams) -> np.ndarray:
        return np.array([self.coef_at(float(l)) for l in np.atleast_1d(lams)])

    def sign_patterns(self):
        """Sign vectors at every breakpoint and every segment interior."""
        S = np.sign(self.coefs)
        yield from S
        mids = np.sign(0.5 * (self.coefs[:-1] + self.coefs[1:]))
        yield from mids

    def to_csv(self, labels=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        p = self.n_features
        names = list(labels) if labels is not None else [f"beta{j}" for j in range(1, p + 1)]
        w.writerow(["lambda"] + names)
        for lam, row in zip(self.lambdas, self.coefs):
            w.writerow([format(float(lam), ".17g")] + [format(float(v), ".17g") for v in row])
        return buf.getvalue()


def lasso_path(X, y, *, max_steps: int | None = None, rank_tol: float = 1e-10) -> LassoPath:
    """Exact solution path of ``||y - X b||^2 + lam ||b||_1``.

    Parameters
    ----------
    X : array_like, shape (N, p)
        Design, normally the output of :func:`standardize`.
    y : array_like, shape (N,)
    max_steps : int, optional
        Safety cap on path events, default ``50 * (p + 1)``.
    rank_tol : float
        Relative threshold under which a joining column is treated as a
        linear combination of the active ones and kept out of the model.

    Returns
    -------
    LassoPath

    Notes
    -----
    Works with ``c = X^T (y - X b)`` and ``a = lam / 2``.  Inactive columns
    satisfy ``|c_j| <= a`` and active ones ``c_j = a * sign(b_j)``.  Entry ties
    go to the lowest column index.  Each segment is solved afresh from its
    active set and signs, so no drift accumulates between breakpoints.
    """
    if isinstance(X, DesignMatrix):
        X = X.values
    X = check_finite_matrix(X, name="X")
    y = check_finite_matrix(y, name="y", ndim=1)
    N, p = X.shape
    if y.shape[0] != N:
        raise ValueError(f"X has {N} rows but y has {y.shape[0]}")
    max_steps = 50 * (p + 1) if max_steps is None else max_steps

    G = X.T @ X
    Xty = X.T @ y
    alpha = float(np.max(np.abs(Xty))) if p else 0.0
    if p == 0 or alpha == 0.0:
        return LassoPath(np.array([0.0]), np.zeros((1, p)), ("end",))

    active: list[int] = []
    signs: dict[int, float] = {}
    excluded: set[int] = set()
    lambdas = [2 * alpha]
    coefs = [np.zeros(p)]
    events = ["start"]
    max_active = min(N, p)
    # the column just moved sits on its boundary at the current breakpoint;
    # only strictly later crossings count for it
    gap = 1e-10
    last = -1

    def try_add(j: int, sign: float) -> bool:
        if active:
            A = np.array(active)
            sol = np.linalg.solve(G[np.ix_(A, A)], G[A, j])
            schur = G[j, j] - G[j, A] @ sol
        else:
            schur = G[j, j]
        if schur <= rank_tol * max(G[j, j], 1e-300):
            excluded.add(j)
            return False
        active.append(j)
        signs[j] = sign
        return True

    j0 = int(np.argmax(np.abs(Xty)))
    try_add(j0, 1.0 if Xty[j0] > 0 else -1.0)
    last = j0

    for _ in range(max_steps):
        if not active:
            break
        # on this segment beta_A(alpha) = u - alpha * d and, off the active
        # set, c(alpha) = r + alpha * a; nothing is carried over from earlier
        # segments, so rounding errors do not accumulate along the path
        A = np.array(active)
        s = np.array([signs[j] for j in active])
        sol = np.linalg.solve(G[np.ix_(A, A)], np.column_stack([Xty[A], s]))
        u, d = sol[:, 0], sol[:, 1]
        r = Xty - G[:, A] @ u
        a = G[:, A] @ d
        ceiling = alpha * (1.0 - gap)

        def admissible(j, cand):
            limit = ceiling if j == last else alpha * (1.0 + gap)
            return best < min(cand, alpha) and cand < limit

        best, event, who, new_sign = 0.0, "end", -1, 0.0
        if len(active) < max_active:
            inactive = np.ones(p, bool)
            inactive[A] = False
            for j in excluded:
                inactive[j] = False
            for j in np.flatnonzero(inactive):
                for sign in (1.0, -1.0):
                    den = sign - a[j]
                    if abs(den) <= 1e-12:
                        continue
                    cand = r[j] / den
                    # ties go to the lowest index
                    if admissible(j, cand):
                        best, event, who, new_sign = min(cand, alpha), "join", int(j), sign
        for k, j in enumerate(active):
            if d[k] != 0.0:
                cand = u[k] / d[k]
                # a coefficient at zero now has just joined and moves away
                if best < cand < ceiling:
                    best, event, who = cand, "drop", j
        if best <= 1e-15 * lambdas[0]:
            best, event = 0.0, "end"
        alpha = best
        beta = np.zeros(p)
        beta[A] = u - alpha * d
        if event == "drop":
            beta[who] = 0.0
            active.remove(who)
            del signs[who]
        elif event == "join" and not try_add(who, new_sign):
            event = "skip"
        last = who
        if event != "skip":
            lambdas.append(2 * alpha)
            coefs.append(beta)
            events.append(event)
        if event == "end":
            break
    return LassoPath(np.array(lambdas), np.array(coefs), tuple(events))


def kkt_violation(X, y, beta, lam: float) -> float:
    """Largest breach of the stationarity conditions at penalty ``lam``."""
    X = np.asarray(X, float)
    g = 2.0 * X.T @ (np.asarray(y, float) - X @ beta)
    act = beta != 0
    out = 0.0
    if np.any(act):
        out = max(out, float(np.max(np.abs(g[act] - lam * np.sign(beta[act])))))
    if np.any(~act):
        out = max(out, float(np.max(np.abs(g[~act]) - lam)))
    return max(out, 0.0)


def soft_threshold(z, t):
    z = np.asarray(z, float)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lambda_grid(X, y, n: int = 100, ratio: float = 1e-4) -> np.ndarray:
    """``n`` log-spaced penalties from ``lambda_max`` down to ``ratio * lambda_max``."""
    lam_max = 2.0 * float(np.max(np.abs(np.asarray(X).T @ np.asarray(y))))
    if lam_max == 0.0:
        return np.zeros(1)
    return np.geomspace(lam_max, lam_max * ratio, n)


def lasso_coordinate_descent(X, y, lambdas=None, *, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Warm-started cyclic coordinate descent on a decreasing penalty grid.

    Returns an array of shape (len(lambdas), p).
    """
    X = check_finite_matrix(X, name="X")
    y = check_finite_matrix(y, name="y", ndim=1)
    if lambdas is None:
        lambdas = lambda_grid(X, y)
    lambdas = np.asarray(lambdas, float)
    N, p = X.shape
    norms = np.sum(X * X, axis=0)
    beta = np.zeros(p)
    r = y.copy()
    out = np.zeros((len(lambdas), p))
    for k, lam in enumerate(lambdas):
        for _ in range(max_iter):
            delta = 0.0
            for j in range(p):
                if norms[j] == 0:
                    continue
                old = beta[j]
                z = X[:, j] @ r + norms[j] * old
                new = float(soft_threshold(z, lam / 2.0)) / norms[j]
                if new != old:
                    r -= X[:, j] * (new - old)
                    beta[j] = new
                    delta = max(delta, abs(new - old) * np.sqrt(norms[j]))
            if delta < tol:
                break
        out[k] = beta
    return out


@dataclass(frozen=True)
class TrueModel:
    """Coefficients of the data-generating linear model."""

    beta: np.ndarray
    noise_sd: float = 0.0

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.beta) != 0)


def sign_consistent(path: LassoPath, model: TrueModel, scales=None) -> bool:
    """True if some point of the path has the signs of the true coefficients."""
    beta = np.asarray(model.beta, float)
    if beta.shape != (path.n_features,):
        raise ValueError(f"model has {beta.size} coefficients, path has {path.n_features}")
    if scales is not None:
        scales = np.asarray(scales, float)
        if np.any(scales <= 0):
            raise ValueError("scale factors must be positive")
        beta = beta * scales
    target = np.sign(beta)
    return any(np.array_equal(s, target) for s in path.sign_patterns())


def _interp_predict(path: LassoPath, X, lams) -> np.ndarray:
    return X @ path.coefs_at(lams).T


def kfold_indices(n: int, folds: int, rng: np.random.Generator):
    """Contiguous blocks of a shuffled index vector."""
    perm = rng.permutation(n)
    return np.array_split(perm, folds)


class LassoPathRegressor(RegressorMixin, BaseEstimator):
    """Lasso fitted along the whole path; predicts at a chosen penalty.

    Parameters
    ----------
    lam : float, default=0.0
        Penalty of the un-normalised objective used by ``predict``.
    standardize : bool, default=True
        Scale columns to unit mean square before solving.
    """

    def __init__(self, lam=0.0, standardize=True):
        self.lam = lam
        self.standardize = standardize

    def fit(self, X, y):
        X = check_finite_matrix(X, name="X")
        y = check_finite_matrix(y, name="y", ndim=1)
        self.scale_ = mean_square_scales(X) if self.standardize else np.ones(X.shape[1])
        self.path_ = lasso_path(X / self.scale_, y)
        self.n_features_in_ = X.shape[1]
        self.coef_ = self.path_.coef_at(float(self.lam)) / self.scale_
        return self

    def predict(self, X):
        check_is_fitted(self, "path_")
        X = check_finite_matrix(X, name="X")
        return X @ self.coef_


class LassoPathCV(RegressorMixin, BaseEstimator):
    """Lasso with the penalty chosen by K-fold cross-validation.

    Penalties are compared per sample: a fold with ``n`` training rows uses
    ``lam = n * alpha`` so the same ``alpha`` means the same strength on
    the fold fits and on the final refit.

    Parameters
    ----------
    cv : int, default=5
    n_alphas : int, default=100
    ratio : float, default=1e-4
        Smallest grid value relative to the largest.
    random_state : int or Generator, optional
        Drives the fold shuffle.
    """

    def __init__(self, cv=5, n_alphas=100, ratio=1e-4, random_state=None):
        self.cv = cv
        self.n_alphas = n_alphas
        self.ratio = ratio
        self.random_state = random_state

    def fit(self, X, y):
        X = check_finite_matrix(X, name="X")
        y = check_finite_matrix(y, name="y", ndim=1)
        N = X.shape[0]
        folds = check_int(self.cv, "cv", minimum=2)
        rng = self.random_state if isinstance(self.random_state, np.random.Generator) else np.random.default_rng(self.random_state)
        scale = mean_square_scales(X)
        Xs = X / scale
        full = lasso_path(Xs, y)
        a_max = full.lambda_max / N
        if a_max == 0.0:
            self.alphas_ = np.zeros(1)
        else:
            self.alphas_ = np.geomspace(a_max, a_max * self.ratio, self.n_alphas)
        err = np.zeros(len(self.alphas_))
        for hold in kfold_indices(N, folds, rng):
            train = np.setdiff1d(np.arange(N), hold)
            s = mean_square_scales(X[train])
            path = lasso_path(X[train] / s, y[train])
            pred = _interp_predict(path, X[hold] / s, self.alphas_ * len(train))
            err += np.sum((y[hold][:, None] - pred) ** 2, axis=0)
        self.cv_mse_ = err / N
        best = int(np.argmin(self.cv_mse_))
        self.alpha_ = float(self.alphas_[best])
        self.lam_ = self.alpha_ * N
        self.scale_ = scale
        self.path_ = full
        self.coef_ = full.coef_at(self.lam_) / scale
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return check_finite_matrix(X, name="X") @ self.coef_
