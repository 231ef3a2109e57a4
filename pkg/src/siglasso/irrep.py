"""Irrepresentable conditions, finite-sample probability bounds and the
uniqueness bound for signature regressions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_real
from .moments import MomentMatrix


@dataclass(frozen=True)
class IrrepresentableReport:
    """Norms of ``Delta[Ac, A] Delta[A, A]^{-1}`` and derived margins.

    ``norm_i`` is the sup norm of the image of the sign vector, ``norm_ii``
    the max-row-sum norm of the matrix.  A condition holds when its norm is
    strictly below 1, i.e. the margin ``gamma = 1 - norm`` lies in ``(0, 1]``.
    """

    vector: np.ndarray
    norm_i: float
    norm_ii: float
    singular: bool = False

    @property
    def gamma_i(self) -> float:
        return 1.0 - self.norm_i

    @property
    def gamma_ii(self) -> float:
        return 1.0 - self.norm_ii

    @property
    def holds_i(self) -> bool:
        return not self.singular and self.norm_i < 1.0

    @property
    def holds_ii(self) -> bool:
        return not self.singular and self.norm_ii < 1.0

    @property
    def verdict(self) -> str:
        if self.singular:
            return "SINGULAR"
        return "PASS" if self.holds_i else "FAIL"


def _matrix(corr) -> np.ndarray:
    if isinstance(corr, MomentMatrix):
        corr = corr.correlation().values
    M = np.asarray(corr, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"correlation matrix must be square, got {M.shape}")
    return M


def _resolve_active(corr, active) -> np.ndarray:
    if isinstance(corr, MomentMatrix):
        return np.array([corr.indexing.index(tuple(a)) if not np.isscalar(a) else int(a) for a in active], dtype=int)
    return np.asarray(list(active), dtype=int)


def irrepresentable(corr, active, signs, *, cond_limit: float = 1e12) -> IrrepresentableReport:
    """Evaluate both irrepresentable norms.

    Parameters
    ----------
    corr : MomentMatrix or array_like, shape (p, p)
        Correlation matrix (a covariance-kind MomentMatrix is normalised).
    active : sequence
        Active columns, as indices or (for a MomentMatrix) words.
    signs : array_like
        Signs of the active coefficients, same order as ``active``.
    """
    M = _matrix(corr)
    A = _resolve_active(corr, active)
    s = np.sign(np.asarray(signs, dtype=np.float64))
    if s.shape != A.shape:
        raise ValueError(f"{A.size} active columns but {s.size} signs")
    if len(set(A.tolist())) != A.size:
        raise ValueError("active set has repeated columns")
    p = M.shape[0]
    Ac = np.setdiff1d(np.arange(p), A)
    if A.size == 0 or Ac.size == 0:
        return IrrepresentableReport(np.zeros(Ac.size), 0.0, 0.0)
    DAA = M[np.ix_(A, A)]
    if not np.all(np.isfinite(DAA)) or np.linalg.cond(DAA) > cond_limit:
        return IrrepresentableReport(np.full(Ac.size, np.nan), math.inf, math.inf, singular=True)
    W = np.linalg.solve(DAA, M[np.ix_(A, Ac)]).T
    vec = W @ s
    return IrrepresentableReport(vec, float(np.max(np.abs(vec))), float(np.max(np.sum(np.abs(W), axis=1))))


def sufficient_bound(q_max: int) -> float:
    """Correlation bound ``1 / (2 q_max - 1)`` under which both conditions hold."""
    q_max = check_int(q_max, "q_max", minimum=1)
    return 1.0 / (2 * q_max - 1)


def equicorrelation_threshold(a: int) -> float:
    """Smallest equal correlation for which the first-order equicorrelated
    design with ``a`` active columns satisfies the conditions.

    The image of the sign vector is ``a rho / (1 + (a - 1) rho)`` in every
    inactive coordinate, and ``a |rho| < 1 + (a - 1) rho`` for negative
    ``rho`` means ``rho > -1 / (2a - 1)``.
    """
    a = check_int(a, "a", minimum=1)
    return -1.0 / (2 * a - 1)


def g_sigma(x, p: int, rho: float, sigma_min: float) -> float:
    """Monotone function ``g`` on ``[0, sigma_min**2)`` used to define ``xi``."""
    s2 = sigma_min**2
    return 2 * x * s2 * (p - 1) * rho / ((s2 - x) * (2 * s2 - x)) + (p - 1) * x / (s2 - x)


def g_sigma_inverse(y: float, p: int, rho: float, sigma_min: float, tol: float = 1e-12) -> float:
    """Invert :func:`g_sigma` by bisection on ``[0, sigma_min**2)``."""
    if y < 0:
        raise ValueError("g is nonnegative; cannot invert a negative value")
    if p < 2:
        raise ValueError("g is identically 0 for p < 2")
    lo, hi = 0.0, sigma_min**2
    # relative tolerance on x keeps tiny roots accurate
    while hi - lo > tol * max(hi, 1e-300) and hi > lo:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g_sigma(mid, p, rho, sigma_min) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _probability(p, N, xi, lam, sigma_min, sigma_max, c1, c2) -> float:
    first = 1 - 8 * p**4 * sigma_max**4 * (sigma_min**4 + c1) / (N * xi**2 * sigma_min**4)
    return first * (1 - 4 * math.exp(-c2 * N * lam**2))


def finite_sample_ito_bounds(
    rho: float,
    sigma: float,
    q_max: int,
    p: int,
    N: int,
    lam: float,
    sigma_min: float,
    sigma_max: float,
    c1: float = 1.0,
    c2: float = 1.0,
) -> dict:
    """Probability bound, error radius and penalty threshold for equal-order
    correlation ``rho`` (block diagonal designs).

    Parameters
    ----------
    rho : float
        Largest absolute off-diagonal correlation.
    sigma : float
        Noise standard deviation.
    q_max, p, N : int
        Largest per-order active count, number of predictors, sample size.
    lam : float
        Penalty ``lambda_N``; must exceed the returned threshold.
    sigma_min, sigma_max : float
        Smallest and largest standard deviations of the predictors.
    c1, c2 : float
        Constants left unspecified by the theory; 1.0 by default.

    Returns
    -------
    dict with keys ``P_min``, ``h``, ``lambda_threshold``, ``xi``.
    """
    q = check_int(q_max, "q_max", minimum=1)
    p = check_int(p, "p", minimum=2)
    N = check_int(N, "N", minimum=1)
    rho = check_real(rho, "rho", lower=0.0)
    bound = sufficient_bound(q)
    if not rho < bound:
        raise ValueError(f"requires rho < 1/(2 q_max - 1) = {bound:.6g}, got rho = {rho}")
    lead = (1 - (q - 1) * rho)
    thr = 4 * sigma * lead / (1 - (2 * q - 1) * rho) * math.sqrt(2 * math.log(p) / N)
    if not lam > thr:
        raise ValueError(f"requires lambda_N > 4 sigma (1-(q-1)rho)/(1-(2q-1)rho) sqrt(2 ln p / N) = {thr:.6g}, got {lam}")
    t1 = (1 - (2 * q - 1) * rho) * lead / (3 - (2 * q - 3) * rho)
    t2 = lead / (2 * math.sqrt(p * q))
    xi = min(g_sigma_inverse(t1, p, rho, sigma_min), g_sigma_inverse(t2, p, rho, sigma_min))
    h = lam * ((3 - (2 * q - 3) * rho) / (lead * (2 + 2 * rho)) + 4 * sigma * math.sqrt(2 * math.sqrt(q) / lead))
    P = _probability(p, N, xi, lam, sigma_min, sigma_max, c1, c2)
    return {"P_min": P, "h": h, "lambda_threshold": thr, "xi": xi}


def finite_sample_general_bounds(
    alpha: float,
    zeta: float,
    C_min: float,
    gamma: float,
    sigma: float,
    p: int,
    N: int,
    lam: float,
    sigma_min: float,
    sigma_max: float,
    rho: float = 0.0,
    c1: float = 1.0,
    c2: float = 1.0,
) -> dict:
    """Probability bound for a general correlation structure.

    ``alpha = ||Delta[Ac, A]||_inf``, ``zeta = ||Delta[A, A]^{-1}||_inf``,
    ``C_min`` the smallest eigenvalue of ``Delta[A, A]`` and ``gamma`` the
    condition-II margin.  ``rho`` is the largest absolute off-diagonal
    correlation entering ``g``.
    """
    gamma = check_real(gamma, "gamma", lower=0.0, upper=1.0, lower_open=True)
    p = check_int(p, "p", minimum=2)
    N = check_int(N, "N", minimum=1)
    thr = 4 * sigma / gamma * math.sqrt(2 * math.log(p) / N)
    if not lam > thr:
        raise ValueError(f"requires lambda_N > (4 sigma / gamma) sqrt(2 ln p / N) = {thr:.6g}, got {lam}")
    t1 = gamma / (zeta * (2 + 2 * alpha * zeta + gamma))
    t2 = C_min / (2 * math.sqrt(p))
    xi = min(g_sigma_inverse(t1, p, rho, sigma_min), g_sigma_inverse(t2, p, rho, sigma_min))
    h = lam * (zeta * (2 + 2 * alpha * zeta + gamma) / (2 + 2 * alpha * zeta) + 4 * sigma / math.sqrt(0.5 * C_min))
    P = _probability(p, N, xi, lam, sigma_min, sigma_max, c1, c2)
    return {"P_min": P, "h": h, "lambda_threshold": thr, "xi": xi}


def _inf_norm(M: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(M), axis=1))) if M.size else 0.0


def derive_general_params(corr, active, *, by_parity: bool = False) -> dict:
    """``alpha, zeta, C_min, gamma`` (and ``rho``) from a correlation matrix.

    With ``by_parity`` the quantities are computed separately on the odd and
    even blocks and combined (max of norms, min of eigenvalues and margins).
    """
    M = _matrix(corr)
    A = _resolve_active(corr, active)
    p = M.shape[0]
    off = M - np.diag(np.diag(M))
    rho = float(np.max(np.abs(off))) if p > 1 else 0.0
    if by_parity:
        if not isinstance(corr, MomentMatrix):
            raise ValueError("by_parity needs a MomentMatrix to know word orders")
        orders = corr.orders
        parts = []
        for parity in (1, 0):
            cols = np.flatnonzero(orders % 2 == parity)
            sub = M[np.ix_(cols, cols)]
            sub_active = [int(np.flatnonzero(cols == a)[0]) for a in A if orders[a] % 2 == parity]
            if sub_active:
                parts.append(derive_general_params(sub, sub_active))
        return {
            "alpha": max(q["alpha"] for q in parts),
            "zeta": max(q["zeta"] for q in parts),
            "C_min": min(q["C_min"] for q in parts),
            "gamma": min(q["gamma"] for q in parts),
            "rho": rho,
        }
    Ac = np.setdiff1d(np.arange(p), A)
    DAA = M[np.ix_(A, A)]
    inv = np.linalg.inv(DAA)
    return {
        "alpha": _inf_norm(M[np.ix_(Ac, A)]),
        "zeta": _inf_norm(inv),
        "C_min": float(np.linalg.eigvalsh(DAA)[0]),
        "gamma": 1.0 - _inf_norm(M[np.ix_(Ac, A)] @ inv),
        "rho": rho,
    }


@dataclass(frozen=True)
class UniquenessBound:
    P_star: float
    eta_bar: float
    conditional_moment: float
    standard_error: float
    accepted: int


def uniqueness_bound(samples, a, b, theta: float, eta: float, sigma=None) -> UniquenessBound:
    """Lower bound on the probability that two coefficient vectors give
    distinguishable responses.

    Parameters
    ----------
    samples : array_like, shape (M, p)
        Monte Carlo draws of the signature vector.
    a, b : array_like, shape (p,)
        Distinct coefficient vectors.
    theta : float
        Ball radius multiplier, ``> 1``.
    eta : float
        Separation level in ``(0, eta_bar)``.
    sigma : MomentMatrix or array_like, optional
        Second-moment matrix ``E[S S^T]``; estimated from ``samples`` if
        omitted.
    """
    S = np.asarray(samples, dtype=np.float64)
    if S.ndim != 2:
        raise ValueError("samples must be an (M, p) array")
    a, b = np.asarray(a, float), np.asarray(b, float)
    c = a - b
    if not np.any(c):
        raise ValueError("a and b must differ")
    theta = check_real(theta, "theta", lower=1.0, lower_open=True)
    M, p = S.shape
    if sigma is None:
        Sigma = S.T @ S / M
    elif isinstance(sigma, MomentMatrix):
        Sigma = sigma.values
    else:
        Sigma = np.asarray(sigma, float)
    norm2 = float(np.linalg.eigvalsh(Sigma)[-1])
    radius = theta * math.sqrt(p * norm2)
    keep = np.linalg.norm(S, axis=1) <= radius
    if not np.any(keep):
        raise ValueError(f"no Monte Carlo draw satisfies ||S|| <= {radius:.6g}; increase theta")
    proj = (S[keep] @ c) ** 2
    moment = float(proj.mean())
    se_moment = float(proj.std(ddof=1) / math.sqrt(proj.size)) if proj.size > 1 else math.inf
    D = theta * float(np.max(np.abs(c))) * p * math.sqrt(norm2)
    ratio = moment / D
    eta_bar = min(ratio, D)
    if not 0 < eta < eta_bar:
        raise ValueError(f"eta must lie in (0, {eta_bar:.6g}), got {eta}")
    pref = 1 - 1 / theta
    P = pref * (ratio - eta) / (D - eta)
    se = pref * se_moment / D / (D - eta)
    return UniquenessBound(P, eta_bar, moment, se, int(keep.sum()))
