"""Number-theoretic primitives: a-adic fractional parts, commensurability
of bases and gap statistics of rotation orbits."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import mpmath
import numpy as np

from .errors import DomainError

# working precision (decimal digits) for scalar logarithms
_DPS = 40
CIRCLE_TOL = 1e-12


@dataclass(frozen=True)
class AdicFrac:
    """The scale phase ``(-log_base |s|) mod 1`` of a nonzero real ``s``."""

    value: float
    base: int

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class CommensurabilityVerdict:
    """``related`` is true iff ``log a / log b`` is rational; then it equals ``ratio``."""

    related: bool
    ratio: Fraction | None = None

    def __bool__(self):
        return self.related


def _check_base(a):
    if isinstance(a, bool) or int(a) != a or a < 2:
        raise DomainError(f"invalid base {a!r}: need an integer >= 2")
    return int(a)


def _to_mpf(s):
    if isinstance(s, Rational) and not isinstance(s, int):
        return mpmath.mpf(s.numerator) / s.denominator
    return mpmath.mpf(s)


def adic_frac(s, a) -> AdicFrac:
    """Return ``{s}_a = (-log_a |s|) mod 1``.

    Logarithms are evaluated with 40 significant digits before the mod-1
    reduction. ``Fraction`` inputs are converted exactly.

    >>> adic_frac(Fraction(-1, 9), 3).value
    0.0
    """
    a = _check_base(a)
    if s == 0:
        raise DomainError("adic_frac is undefined at s = 0")
    with mpmath.workdps(_DPS):
        x = -mpmath.log(abs(_to_mpf(s))) / mpmath.log(a)
        t = x - mpmath.floor(x)
        v = float(t)
        # exact powers of the base land within 1e-40 of 0 or 1
        if t < mpmath.mpf(10) ** -30 or v >= 1.0:
            v = 0.0
    return AdicFrac(v, a)


def circular_distance(u, v):
    """``min(|u - v|, 1 - |u - v|)`` after reducing both arguments mod 1."""
    d = np.abs(np.mod(u, 1.0) - np.mod(v, 1.0))
    out = np.minimum(d, 1.0 - d)
    return float(out) if np.ndim(out) == 0 else out


def _factor(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _exponents(r) -> dict[int, int]:
    r = Fraction(r)
    if r <= 0:
        raise DomainError(f"commensurability needs positive magnitudes, got {r}")
    num = _factor(r.numerator)
    for p, e in _factor(r.denominator).items():
        num[p] = num.get(p, 0) - e
    return num


def commensurability(a, b) -> CommensurabilityVerdict:
    """Decide ``a ~ b`` (``log a / log b`` rational) exactly.

    ``a`` and ``b`` are integers >= 2; positive ``Fraction`` magnitudes are
    accepted too, which is how affine slopes are compared with a base.
    The ratio ``p/q`` is certified by checking ``a**q == b**p`` in exact
    rational arithmetic.
    """
    for v in (a, b):
        if isinstance(v, int) and not isinstance(v, bool) and v < 2:
            raise DomainError(f"invalid base {v!r}: need an integer >= 2")
    ea, eb = _exponents(a), _exponents(b)
    if not eb:
        raise DomainError("log b = 0: the second argument must not be 1")
    if not ea:
        return CommensurabilityVerdict(True, Fraction(0))
    if set(ea) != set(eb):
        return CommensurabilityVerdict(False)
    p0 = next(iter(eb))
    ratio = Fraction(ea[p0], eb[p0])
    if any(Fraction(ea[p], eb[p]) != ratio for p in eb):
        return CommensurabilityVerdict(False)
    fa, fb = Fraction(a), Fraction(b)
    p, q = ratio.numerator, ratio.denominator
    if fa ** q != fb ** p:  # pragma: no cover - guaranteed by factorisation
        raise AssertionError("factorisation and power check disagree")
    return CommensurabilityVerdict(True, ratio)


def orbit_points(alpha, n: int) -> np.ndarray:
    """``{k * alpha mod 1 : 0 <= k < n}`` in extended precision."""
    k = np.arange(n, dtype=np.longdouble)
    return np.mod(k * np.longdouble(alpha), 1)


def orbit_gaps(alpha, n: int) -> np.ndarray:
    """Circular gaps between consecutive sorted orbit points (length ``n``)."""
    if n < 1:
        raise DomainError("need at least one orbit point")
    pts = np.sort(orbit_points(alpha, n))
    return np.diff(np.concatenate([pts, [pts[0] + 1]]))


def rotation_orbit_gap(alpha, n: int) -> float:
    """Largest empty arc of ``{k alpha mod 1 : 0 <= k < n}``."""
    return float(orbit_gaps(alpha, n).max())
