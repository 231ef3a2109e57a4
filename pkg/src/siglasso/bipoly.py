"""Exact piecewise bivariate polynomials in ``(l, t)``.

A :class:`PiecewiseBivariatePoly` holds one polynomial valid on ``{l <= t}``
and one valid on ``{l > t}``, both with :class:`fractions.Fraction`
coefficients.  The three integrals used by the second-moment recursion keep
the representation closed:

``int_second``  ``(l, t) -> int_0^t P(l, s) ds``
    on ``l <= t`` this is ``int_0^l P_gt(l, s) ds + int_l^t P_le(l, s) ds``;
    on ``l > t`` it is ``int_0^t P_gt(l, s) ds``.
``int_first``   ``(l, t) -> int_0^l P(r, t) dr``
    on ``l <= t`` this is ``int_0^l P_le(r, t) dr``;
    on ``l > t`` it is ``int_0^t P_le(r, t) dr + int_t^l P_gt(r, t) dr``.
``diag_integral``  ``(l, t) -> int_0^{min(l, t)} P(s, s) ds``.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

Monomials = dict[tuple[int, int], Fraction]


def _clean(terms: Monomials) -> Monomials:
    return {k: v for k, v in terms.items() if v != 0}


def _add(a: Monomials, b: Monomials, scale: Fraction = Fraction(1)) -> Monomials:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, Fraction(0)) + scale * v
    return _clean(out)


def _scale(a: Monomials, c: Fraction) -> Monomials:
    return _clean({k: c * v for k, v in a.items()})


def _anti_second(a: Monomials, upper: str) -> Monomials:
    """``int_0^{upper} P(l, s) ds`` with ``upper`` in {"l", "t"}."""
    out: Monomials = {}
    for (i, j), c in a.items():
        c = c / (j + 1)
        key = (i + j + 1, 0) if upper == "l" else (i, j + 1)
        out[key] = out.get(key, Fraction(0)) + c
    return _clean(out)


def _anti_first(a: Monomials, upper: str) -> Monomials:
    """``int_0^{upper} P(r, t) dr`` with ``upper`` in {"l", "t"}."""
    out: Monomials = {}
    for (i, j), c in a.items():
        c = c / (i + 1)
        key = (i + 1, j) if upper == "l" else (0, i + j + 1)
        out[key] = out.get(key, Fraction(0)) + c
    return _clean(out)


def _diag_anti(a: Monomials, var: str) -> Monomials:
    """``int_0^{var} P(s, s) ds`` as a polynomial in ``l`` or ``t``."""
    out: Monomials = {}
    for (i, j), c in a.items():
        deg = i + j + 1
        key = (deg, 0) if var == "l" else (0, deg)
        out[key] = out.get(key, Fraction(0)) + c / deg
    return _clean(out)


def _eval(a: Monomials, l, t):
    return sum((c * l**i * t**j for (i, j), c in a.items()), Fraction(0) if isinstance(l, Rational) else 0.0)


class PiecewiseBivariatePoly:
    """Pair of exact bivariate polynomials split along the diagonal ``l = t``."""

    __slots__ = ("le", "gt")

    def __init__(self, le: Monomials | None = None, gt: Monomials | None = None):
        self.le = _clean(dict(le or {}))
        self.gt = _clean(dict(gt or {}))

    @classmethod
    def constant(cls, c) -> "PiecewiseBivariatePoly":
        c = Fraction(c)
        return cls({(0, 0): c}, {(0, 0): c})

    @classmethod
    def zero(cls) -> "PiecewiseBivariatePoly":
        return cls()

    def is_zero(self) -> bool:
        return not self.le and not self.gt

    def __add__(self, other: "PiecewiseBivariatePoly") -> "PiecewiseBivariatePoly":
        return PiecewiseBivariatePoly(_add(self.le, other.le), _add(self.gt, other.gt))

    def scale(self, c) -> "PiecewiseBivariatePoly":
        c = Fraction(c)
        return PiecewiseBivariatePoly(_scale(self.le, c), _scale(self.gt, c))

    def __eq__(self, other) -> bool:
        return isinstance(other, PiecewiseBivariatePoly) and self.le == other.le and self.gt == other.gt

    def __hash__(self):
        return hash((frozenset(self.le.items()), frozenset(self.gt.items())))

    def int_second(self) -> "PiecewiseBivariatePoly":
        """``(l, t) -> int_0^t P(l, s) ds``."""
        up_to_l = _anti_second(self.gt, "l")
        le = _add(_add(up_to_l, _anti_second(self.le, "t")), _anti_second(self.le, "l"), Fraction(-1))
        return PiecewiseBivariatePoly(le, _anti_second(self.gt, "t"))

    def int_first(self) -> "PiecewiseBivariatePoly":
        """``(l, t) -> int_0^l P(r, t) dr``."""
        le = _anti_first(self.le, "l")
        gt = _add(_add(_anti_first(self.le, "t"), _anti_first(self.gt, "l")), _anti_first(self.gt, "t"), Fraction(-1))
        return PiecewiseBivariatePoly(le, gt)

    def diag_integral(self) -> "PiecewiseBivariatePoly":
        """``(l, t) -> int_0^{min(l, t)} P(s, s) ds`` using the closed piece on the diagonal."""
        return PiecewiseBivariatePoly(_diag_anti(self.le, "l"), _diag_anti(self.le, "t"))

    def swap(self) -> "PiecewiseBivariatePoly":
        """``(l, t) -> P(t, l)``."""
        flip = lambda a: {(j, i): c for (i, j), c in a.items()}  # noqa: E731
        return PiecewiseBivariatePoly(flip(self.gt), flip(self.le))

    def diagonal(self, piece: str = "le") -> dict[int, Fraction]:
        """Univariate coefficients of ``s -> P(s, s)`` from one piece."""
        out: dict[int, Fraction] = {}
        for (i, j), c in (self.le if piece == "le" else self.gt).items():
            out[i + j] = out.get(i + j, Fraction(0)) + c
        return {k: v for k, v in out.items() if v != 0}

    def diagonal_agrees(self) -> bool:
        """True when both pieces restrict to the same polynomial on ``l = t``."""
        return self.diagonal("le") == self.diagonal("gt")

    def __call__(self, l, t):
        """Evaluate; exact for rational inputs, float otherwise."""
        return _eval(self.le if l <= t else self.gt, l, t)

    def __repr__(self) -> str:
        return f"PiecewiseBivariatePoly(le={self.le!r}, gt={self.gt!r})"
