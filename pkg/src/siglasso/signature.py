"""Truncated signatures of discrete paths.

Three discretisations of the iterated integrals are supported:

``ito``
    left-point sums, ``S_{t_{j+1}}^{w i} = S_{t_j}^{w i} + S_{t_j}^w dX^i_j``
``stratonovich``
    trapezoid sums, ``S_{t_{j+1}}^{w i} = S_{t_j}^{w i} + (S_{t_j}^w + S_{t_{j+1}}^w) dX^i_j / 2``
``linear``
    exact signature of the piecewise linear interpolant, one segment at a time
    through Chen's identity.

Components are flat-indexed in the recursive order of :mod:`siglasso.words`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_paths
from .words import Word, WordIndexing, enumerate_words, word_count

CONVENTIONS = ("ito", "stratonovich", "linear")

# upper bound on doubles held by one level workspace
_WORKSPACE = 1 << 22


@dataclass(frozen=True)
class Path:
    """A d-dimensional path sampled on a strictly increasing grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or values.ndim != 2:
            raise ValueError("times must be 1-d and values 2-d")
        if len(times) < 2:
            raise ValueError("a path needs at least 2 grid points")
        if len(times) != len(values):
            raise ValueError(f"{len(times)} grid times but {len(values)} value rows")
        if np.any(np.diff(times) <= 0):
            raise ValueError("grid times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("path contains non-finite entries")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return len(self.times) - 1

    @classmethod
    def uniform(cls, values, T: float = 1.0, t0: float = 0.0) -> "Path":
        values = np.asarray(values, dtype=np.float64)
        return cls(np.linspace(t0, t0 + T, len(values)), values)


@dataclass(frozen=True)
class SignatureVector:
    """Terminal values of a truncated signature."""

    indexing: WordIndexing
    values: np.ndarray
    convention: str
    header: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.indexing),):
            raise ValueError(f"expected {len(self.indexing)} values, got shape {values.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(
            self, "header", {"d": self.indexing.d, "K": self.indexing.K, "convention": self.convention}
        )

    def __getitem__(self, word: Word) -> float:
        return float(self.values[self.indexing.index(tuple(word))])

    def __len__(self) -> int:
        return len(self.values)


def _check_convention(convention: str) -> str:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    return convention


def _iterated_sums(paths: np.ndarray, K: int, midpoint: bool) -> np.ndarray:
    m, n1, d = paths.shape
    dX = np.diff(paths, axis=1)
    out = np.empty((m, word_count(d, K)))
    out[:, 0] = 1.0
    prev = np.ones((m, n1, 1))
    pos = 1
    for k in range(1, K + 1):
        width = prev.shape[2]
        if midpoint:
            weight = 0.5 * (prev[:, :-1, :] + prev[:, 1:, :])
        else:
            weight = prev[:, :-1, :]
        if k == K:
            # only the terminal value is needed at the last order
            for i in range(d):
                out[:, pos + i * width : pos + (i + 1) * width] = np.einsum("mjw,mj->mw", weight, dX[:, :, i])
            break
        cur = np.zeros((m, n1, width * d))
        for i in range(d):
            np.cumsum(weight * dX[:, :, i, None], axis=1, out=cur[:, 1:, i * width : (i + 1) * width])
        out[:, pos : pos + width * d] = cur[:, -1, :]
        pos += width * d
        prev = cur
    return out


def _chen_linear(paths: np.ndarray, K: int) -> np.ndarray:
    m, n1, d = paths.shape
    dX = np.diff(paths, axis=1)
    levels = [np.ones((m, 1))] + [np.zeros((m, d**k)) for k in range(1, K + 1)]
    for j in range(n1 - 1):
        delta = dX[:, j, :]
        seg = [np.ones((m, 1))]
        for k in range(1, K + 1):
            seg.append((delta[:, :, None] * seg[-1][:, None, :]).reshape(m, -1) / k)
        new = [levels[0]]
        for k in range(1, K + 1):
            acc = seg[k].copy()
            for a in range(1, k + 1):
                # word u.v with u from the running signature and v from the segment
                acc += (seg[k - a][:, :, None] * levels[a][:, None, :]).reshape(m, -1)
            new.append(acc)
        levels = new
    return np.concatenate(levels, axis=1)


def signature_batch(paths, K: int, convention: str = "ito") -> np.ndarray:
    """Signatures of a batch of paths.

    Parameters
    ----------
    paths : array_like, shape (m, n + 1, d)
        Path values on a common grid.  A 2-d array is a single path.
    K : int
        Truncation order.
    convention : {"ito", "stratonovich", "linear"}

    Returns
    -------
    ndarray, shape (m, p)
        Terminal signature components in recursive order, ``p = word_count(d, K)``.
    """
    paths = check_paths(paths)
    K = check_int(K, "K", minimum=0)
    _check_convention(convention)
    m, n1, d = paths.shape
    if K == 0:
        return np.ones((m, 1))
    per_path = n1 * d**K if convention != "linear" else d**K * (K + 1)
    chunk = max(1, _WORKSPACE // max(per_path, 1))
    parts = []
    for start in range(0, m, chunk):
        block = paths[start : start + chunk]
        if convention == "linear":
            parts.append(_chen_linear(block, K))
        else:
            parts.append(_iterated_sums(block, K, midpoint=convention == "stratonovich"))
    return np.concatenate(parts, axis=0)


def signature(path: Path, K: int, convention: str = "ito") -> SignatureVector:
    """Signature of one path at its terminal time."""
    values = signature_batch(path.values, K, convention)[0]
    return SignatureVector(enumerate_words(path.d, K), values, convention)


def ito_signature(path: Path, K: int) -> SignatureVector:
    """Left-point iterated sums."""
    return signature(path, K, "ito")


def stratonovich_signature(path: Path, K: int) -> SignatureVector:
    """Trapezoid iterated sums."""
    return signature(path, K, "stratonovich")


def linear_signature(path: Path, K: int) -> SignatureVector:
    """Exact signature of the piecewise linear interpolant."""
    return signature(path, K, "linear")


def time_augment(path: Path) -> Path:
    """Prepend the time grid as coordinate 1."""
    return Path(path.times, np.column_stack([path.times, path.values]))


def augment_batch(paths, times) -> np.ndarray:
    """Batch version of :func:`time_augment`."""
    paths = check_paths(paths)
    times = np.asarray(times, dtype=np.float64)
    if times.shape != (paths.shape[1],):
        raise ValueError(f"times must have length {paths.shape[1]}")
    tcol = np.broadcast_to(times[None, :, None], (paths.shape[0], paths.shape[1], 1))
    return np.concatenate([tcol, paths], axis=2)


class SignatureTransformer(TransformerMixin, BaseEstimator):
    """Map paths of shape (m, n + 1, d) to truncated signature features.

    Parameters
    ----------
    depth : int, default=4
        Truncation order ``K``.
    convention : {"ito", "stratonovich", "linear"}, default="ito"
    augment_time : bool, default=False
        Prepend a time coordinate on ``[0, T]`` before transforming.
    T : float, default=1.0
        Horizon used for the time coordinate.
    """

    def __init__(self, depth=4, convention="ito", augment_time=False, T=1.0):
        self.depth = depth
        self.convention = convention
        self.augment_time = augment_time
        self.T = T

    def fit(self, X, y=None):
        X = check_paths(X, name="X")
        check_int(self.depth, "depth", minimum=0)
        _check_convention(self.convention)
        self.n_points_ = X.shape[1]
        self.n_dims_ = X.shape[2]
        d = self.n_dims_ + (1 if self.augment_time else 0)
        self.indexing_ = enumerate_words(d, self.depth)
        self.n_features_out_ = len(self.indexing_)
        return self

    def transform(self, X):
        check_is_fitted(self, "indexing_")
        X = check_paths(X, name="X")
        if X.shape[2] != self.n_dims_:
            raise ValueError(f"X has {X.shape[2]} coordinates, fitted with {self.n_dims_}")
        if self.augment_time:
            X = augment_batch(X, np.linspace(0.0, self.T, X.shape[1]))
        return signature_batch(X, self.depth, self.convention)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "indexing_")
        return np.array(["S" + label for label in self.indexing_.labels], dtype=object)
