"""Piecewise elementary maps with closed-form derivatives, and interval
images of covers."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, ParseError, SplitRequired
from .symbolic import Cover

KINDS = ("affine", "poly", "moebius")


@dataclass(frozen=True)
class Piece:
    """One elementary branch on the closed interval ``[lo, hi]``.

    * ``affine``: ``coeffs = (r, t)`` for ``r x + t``;
    * ``poly``: ascending coefficients ``c0 .. c4``;
    * ``moebius``: ``(alpha, beta, gamma, delta)`` for ``(alpha x + beta) / (gamma x + delta)``.
    """

    lo: float
    hi: float
    kind: str
    coeffs: tuple[float, ...]
    curvature: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParseError(f"unknown piece kind {self.kind!r}")
        if not self.lo < self.hi:
            raise ParseError(f"empty piece domain [{self.lo}, {self.hi}]")
        c = tuple(float(v) for v in self.coeffs)
        object.__setattr__(self, "coeffs", c)
        if self.kind == "affine" and len(c) != 2:
            raise ParseError("affine pieces take 2 coefficients (r, t)")
        if self.kind == "poly" and not 1 <= len(c) <= 5:
            raise ParseError("polynomial pieces take 1 to 5 coefficients (degree <= 4)")
        if self.kind == "moebius" and len(c) != 4:
            raise ParseError("moebius pieces take 4 coefficients (alpha, beta, gamma, delta)")
        self._check_local_diffeo()
        object.__setattr__(self, "curvature", self._curvature_flag())

    # evaluation ----------------------------------------------------------

    def value(self, x):
        x = np.asarray(x, dtype=np.longdouble)
        c = self.coeffs
        if self.kind == "affine":
            return c[0] * x + c[1]
        if self.kind == "poly":
            return np.polynomial.polynomial.polyval(x, np.array(c, dtype=np.longdouble))
        a, b, g, d = c
        return (a * x + b) / (g * x + d)

    def d1(self, x):
        x = np.asarray(x, dtype=np.longdouble)
        c = self.coeffs
        if self.kind == "affine":
            return np.full_like(x, c[0])
        if self.kind == "poly":
            dc = np.polynomial.polynomial.polyder(np.array(c, dtype=np.longdouble))
            return np.polynomial.polynomial.polyval(x, dc) + 0 * x
        a, b, g, d = c
        return (a * d - b * g) / (g * x + d) ** 2

    def d2(self, x):
        x = np.asarray(x, dtype=np.longdouble)
        c = self.coeffs
        if self.kind == "affine":
            return np.zeros_like(x)
        if self.kind == "poly":
            dc = np.polynomial.polynomial.polyder(np.array(c, dtype=np.longdouble), 2)
            return np.polynomial.polynomial.polyval(x, dc) + 0 * x
        a, b, g, d = c
        return -2 * g * (a * d - b * g) / (g * x + d) ** 3

    def d2_bound(self, lo, hi):
        """``sup |f''|`` over ``[lo, hi]`` (vectorised over interval arrays)."""
        lo = np.asarray(lo, dtype=np.longdouble)
        hi = np.asarray(hi, dtype=np.longdouble)
        if self.kind == "affine":
            return np.zeros_like(lo)
        m = np.maximum(np.abs(self.d2(lo)), np.abs(self.d2(hi)))
        if self.kind == "poly" and len(self.coeffs) == 5:
            # f'' is quadratic: include its vertex when it falls inside
            c = self.coeffs
            v = -6 * c[3] / (24 * c[4]) if c[4] else None
            if v is not None:
                inside = (lo <= v) & (v <= hi)
                m = np.where(inside, np.maximum(m, abs(float(self.d2(v)))), m)
        return m

    # validation ------------------------------------------------------------

    def _check_local_diffeo(self):
        c = self.coeffs
        if self.kind == "affine" and c[0] == 0:
            raise ParseError("affine piece with zero slope is not a local diffeomorphism")
        if self.kind == "moebius":
            a, b, g, d = c
            if a * d - b * g == 0:
                raise ParseError("degenerate moebius piece (alpha delta - beta gamma = 0)")
            if g != 0 and self.lo <= -d / g <= self.hi:
                raise ParseError("moebius pole inside the piece domain")
        if self.kind == "poly":
            dc = np.polynomial.polynomial.polyder(np.array(c))
            if not np.any(dc):
                raise ParseError("constant polynomial piece")
            if len(dc) > 1:
                roots = np.polynomial.polynomial.polyroots(dc)
                real = roots[np.abs(roots.imag) < 1e-12].real
                if np.any((real > self.lo) & (real < self.hi)):
                    raise ParseError("f' vanishes inside a polynomial piece")
        grid = np.linspace(self.lo, self.hi, 100)[1:-1]
        if np.any(self.d1(grid) == 0):
            raise ParseError("f' vanishes inside the piece")

    def _curvature_flag(self) -> int:
        grid = np.linspace(self.lo, self.hi, 100)
        s = np.sign(np.asarray(self.d2(grid), dtype=float))
        inner = s[1:-1]
        if np.all(s == 0):
            return 0
        if np.all(inner > 0) and np.all(s >= 0):
            return 1
        if np.all(inner < 0) and np.all(s <= 0):
            return -1
        raise ParseError(
            f"f'' changes sign on [{self.lo}, {self.hi}]; split the piece at the inflection point"
        )


@dataclass(frozen=True)
class SmoothMap:
    """Piecewise elementary map; interior shared endpoints form the exceptional set."""

    pieces: tuple[Piece, ...]
    name: str = ""

    def __post_init__(self):
        if not self.pieces:
            raise ParseError("a map needs at least one piece")
        ps = tuple(sorted(self.pieces, key=lambda p: p.lo))
        for p, q in zip(ps, ps[1:]):
            if q.lo < p.hi:
                raise ParseError(f"pieces [{p.lo}, {p.hi}] and [{q.lo}, {q.hi}] overlap")
        object.__setattr__(self, "pieces", ps)

    @classmethod
    def affine(cls, r, t=0.0, domain=(0.0, 1.0)):
        return cls((Piece(float(domain[0]), float(domain[1]), "affine", (float(r), float(t))),),
                   name=f"{r}x+{t}")

    @classmethod
    def poly(cls, coeffs, domain=(0.0, 1.0), name=""):
        return cls((Piece(float(domain[0]), float(domain[1]), "poly", tuple(coeffs)),), name=name)

    @property
    def breakpoints(self) -> np.ndarray:
        """The exceptional set: endpoints shared by two pieces."""
        ends = [p.hi for p in self.pieces[:-1] if any(q.lo == p.hi for q in self.pieces)]
        return np.array(ends)

    @property
    def domain(self) -> tuple[float, float]:
        return self.pieces[0].lo, self.pieces[-1].hi

    @property
    def is_affine(self) -> bool:
        return all(p.kind == "affine" for p in self.pieces)

    @property
    def piecewise_curved(self) -> bool:
        return all(p.curvature != 0 for p in self.pieces)

    def piece_index(self, x) -> np.ndarray:
        """Index of the piece containing each point (-1 outside every piece)."""
        x = np.asarray(x, dtype=np.longdouble)
        lo = np.array([p.lo for p in self.pieces])
        hi = np.array([p.hi for p in self.pieces])
        i = np.searchsorted(lo, x, side="right") - 1
        ok = (i >= 0) & (x <= hi[np.clip(i, 0, None)])
        return np.where(ok, i, -1)

    def _apply(self, x, method):
        x = np.asarray(x, dtype=np.longdouble)
        idx = self.piece_index(x)
        if np.any(idx < 0):
            raise DomainError("point outside the map's domain")
        out = np.empty_like(x)
        for k, p in enumerate(self.pieces):
            m = idx == k
            if np.any(m):
                out[m] = getattr(p, method)(x[m])
        return out

    def __call__(self, x):
        return self._apply(x, "value")

    def derivative(self, x):
        return self._apply(x, "d1")

    def second_derivative(self, x):
        return self._apply(x, "d2")


def eval_map(f: SmoothMap, x) -> tuple[float, float]:
    """Exact elementary evaluation of ``(f(x), f'(x))`` at one point."""
    xv = float(x)
    if np.any(f.breakpoints == xv):
        raise DomainError(f"{xv} is a breakpoint of the map")
    i = int(f.piece_index(xv))
    if i < 0:
        raise DomainError(f"{xv} lies outside every piece")
    p = f.pieces[i]
    return float(p.value(xv)), float(p.d1(xv))


def image_cover(cover: Cover, f: SmoothMap) -> Cover:
    """Interval images of a cover.

    Each interval lies in a single monotone piece, so its image is spanned
    by the endpoint images; it is further widened on both sides by
    ``sup|f''| len^2 / 8``, the largest deviation of the piece from its
    chord over the interval. Intervals with a breakpoint in their interior
    raise :class:`SplitRequired`.
    """
    lo = np.asarray(cover.lo, dtype=np.longdouble)
    hi = np.asarray(cover.hi, dtype=np.longdouble)
    E = f.breakpoints
    for e in E:
        if np.any((lo < e) & (e < hi)):
            raise SplitRequired(f"cover interval straddles breakpoint {e}; split required")
    mid = (lo + hi) / 2
    idx = f.piece_index(mid)
    plo = np.array([p.lo for p in f.pieces])[idx]
    phi = np.array([p.hi for p in f.pieces])[idx]
    if np.any(idx < 0) or np.any(lo < plo) or np.any(hi > phi):
        raise DomainError("cover interval outside the map's domain")
    out_lo = np.empty_like(lo)
    out_hi = np.empty_like(hi)
    for k, p in enumerate(f.pieces):
        m = idx == k
        if not np.any(m):
            continue
        a, b = p.value(lo[m]), p.value(hi[m])
        pad = p.d2_bound(lo[m], hi[m]) * (hi[m] - lo[m]) ** 2 / 8
        out_lo[m] = np.minimum(a, b) - pad
        out_hi[m] = np.maximum(a, b) + pad
    order = np.argsort(out_lo, kind="stable")
    return Cover(cover.base, cover.depth, out_lo[order], out_hi[order], adic=False)


# --------------------------------------------------------------------------
# map-definition documents


def _number(v, where):
    if isinstance(v, bool):
        raise ParseError(f"{where}: expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v))
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"{where}: bad number {v!r}") from exc
    raise ParseError(f"{where}: expected a number")


def parse_map(doc, source: str | None = None) -> SmoothMap:
    """Build a :class:`SmoothMap` from a JSON map-definition document.

    Numbers may be given as JSON numbers or as exact strings like ``"1/3"``.
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, exc.colno, source) from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("pieces"), list):
        raise ParseError("map definition needs a 'pieces' list", source=source)
    pieces = []
    try:
        for k, item in enumerate(doc["pieces"]):
            where = f"pieces[{k}]"
            if not isinstance(item, dict):
                raise ParseError(f"{where} must be an object")
            dom = item.get("domain")
            if not isinstance(dom, list) or len(dom) != 2:
                raise ParseError(f"{where}.domain must be [lo, hi]")
            kind = item.get("kind")
            coeffs = item.get("coeffs")
            if not isinstance(coeffs, list):
                raise ParseError(f"{where}.coeffs must be a list")
            pieces.append(
                Piece(
                    _number(dom[0], where),
                    _number(dom[1], where),
                    kind,
                    tuple(_number(c, f"{where}.coeffs") for c in coeffs),
                )
            )
        return SmoothMap(tuple(pieces), name=str(doc.get("name", "")))
    except ParseError as exc:
        if exc.source is None:
            raise ParseError(str(exc), source=source) from None
        raise


def load_map(path) -> SmoothMap:
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read map definition: {exc.strerror}", source=path) from exc
    return parse_map(text, source=path)


def shipped_map(name: str) -> SmoothMap:
    from .symbolic import data_path

    return load_map(data_path(f"{name}.map.json"))
