"""Difference sets ``X - X mod 1`` and finite-scale local difference sets.

The local difference set of ``X`` at ``x`` collects the limiting scale
phases ``{x_n - x'_n}_b`` of pairs of distinct points of ``X`` converging
to ``x``. At depth ``n`` it is approximated from depth-``n`` cylinders:

* for every scale ``k`` in ``[k0, n - g - s]`` (``s`` the least integer
  with ``a^s >= b``, so ``s = 1`` when ``b <= a``) take the cylinders meeting
  the closed ball ``B(x, a^-k)`` (on the circle, through a lift that makes
  the neighbourhood contiguous);
* keep pairs whose representative distance is at least ``a^-(n-g)``, so
  the relative error of using cylinder representatives is at most
  ``a^-g`` and the phase error at most ``a^-g / ln b``;
* rasterize the phases to ``D_k``, dilate by ``ceil(eps M)`` cells and
  intersect over ``k``.

Positions are handled in units of ``a^-n``, where cylinder midpoints of
an adic cover differ by exact integers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .circle import CircleSet, cell_of, max_gap, rasterize_arcs
from .errors import DepthTooLarge, DomainError
from .symbolic import Cover, DigitSystem, PointSpec, canonical_points, cover_at_depth

DEFAULT_RESOLUTION = 2**16
DEFAULT_GUARD = 3
DEFAULT_NET_DEPTH = 4
_BLOCK = 512


def max_pairs() -> int:
    """Pair-enumeration cap (``ADICLAB_MAX_PAIRS`` overrides the default 10**9)."""
    return int(float(os.environ.get("ADICLAB_MAX_PAIRS", "1e9")))


def default_depth(base: int) -> int:
    return 14 if base == 2 else 12


@dataclass(frozen=True)
class LocalDiffParams:
    """Truncation parameters of the local difference set.

    ``inner_scale`` (``k0``) defaults to ``depth - guard - 3`` and
    ``epsilon`` to ``4 / resolution``.
    """

    depth: int
    inner_scale: int | None = None
    guard: int = DEFAULT_GUARD
    epsilon: float | None = None
    resolution: int = DEFAULT_RESOLUTION
    rigorous: bool = False

    def __post_init__(self):
        if self.inner_scale is None:
            object.__setattr__(self, "inner_scale", max(1, self.depth - self.guard - 3))
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", 4 / self.resolution)
        self.validate()

    def validate(self):
        n, k0, g = self.depth, self.inner_scale, self.guard
        if g < 1:
            raise DomainError("guard must be >= 1")
        if k0 < 1:
            raise DomainError("inner scale must be >= 1 so that windows do not wrap")
        if not k0 + g < n:
            raise DomainError(f"need inner_scale + guard < depth, got {k0} + {g} >= {n}")
        if self.resolution < 2:
            raise DomainError("invalid resolution")
        if self.epsilon < 2 / self.resolution - 1e-15:
            raise DomainError("epsilon must be at least 2 / resolution")

    def outer_scale(self, a: int, b: int | None = None) -> int:
        """Innermost ball scale: ``depth - guard - s`` with ``s`` the least integer such that ``a^s >= b``.

        The innermost window then spans distance ratios of at least ``b``,
        so its phases can reach every point of the circle.
        """
        return self.depth - self.guard - octave_span(a, a if b is None else b)

    def scales(self, a: int, b: int | None = None) -> range:
        top = self.outer_scale(a, b)
        if top < self.inner_scale:
            raise DomainError(
                f"no admissible scales: inner scale {self.inner_scale} exceeds outer scale {top}"
            )
        return range(self.inner_scale, top + 1)

    @property
    def dilation(self) -> int:
        return int(math.ceil(self.epsilon * self.resolution - 1e-9))

    def with_depth(self, depth: int) -> "LocalDiffParams":
        """Same guard, resolution and epsilon at another depth (inner scale re-derived)."""
        return replace(self, depth=depth, inner_scale=max(1, depth - self.guard - 3))


def octave_span(a: int, b: int) -> int:
    """Least ``s >= 1`` with ``a**s >= b``."""
    s = 1
    while a**s < b:
        s += 1
    return s


# --------------------------------------------------------------------------
# phases


def _log_offset(depth: int, a: int, b: int) -> np.longdouble:
    """``depth * log_b(a)`` to long-double precision."""
    with mpmath.workdps(40):
        v = depth * mpmath.log(a) / mpmath.log(b)
        return np.longdouble(mpmath.nstr(v, 30))


def phases(deltas, depth: int, a: int, b: int) -> np.ndarray:
    """Scale phases ``{delta * a^-depth}_b`` of positive distances given in units of ``a^-depth``."""
    d = np.asarray(deltas, dtype=np.longdouble)
    ph = _log_offset(depth, a, b) - np.log(d) / np.log(np.longdouble(b))
    return np.mod(ph, 1)


def phase_set(deltas, depth: int, a: int, b: int, M: int, rigorous: bool = False) -> CircleSet:
    """Rasterized phases of the distances ``deltas`` (units of ``a^-depth``).

    With ``rigorous`` each distance ``d`` stands for the whole range
    ``[d - 1, d + 1]`` of true distances between points of two cylinders
    and the corresponding phase arc is rasterized.
    """
    deltas = np.asarray(deltas, dtype=np.longdouble)
    if deltas.size == 0:
        return CircleSet.empty(M)
    if not rigorous:
        return CircleSet.from_indices(cell_of(phases(deltas, depth, a, b), M), M)
    lo = phases(deltas + 1, depth, a, b)
    with np.errstate(divide="ignore"):
        width = np.log((deltas + 1) / np.maximum(deltas - 1, 0)) / np.log(np.longdouble(b))
    return rasterize_arcs(lo, lo + width, M)


# --------------------------------------------------------------------------
# pair enumeration


def _check_pairs(n_pairs: int):
    cap = max_pairs()
    if n_pairs > cap:
        raise DepthTooLarge(f"depth too large: {n_pairs} pairs exceed the cap {cap} (ADICLAB_MAX_PAIRS)")


def _blocks(n: int):
    return [(i, min(i + _BLOCK, n)) for i in range(0, n, _BLOCK)]


def _run_blocks(fn, n: int, jobs: int):
    blocks = _blocks(n)
    if jobs <= 1 or len(blocks) <= 1:
        return [fn(lo, hi) for lo, hi in blocks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def distinct_separations(pos: np.ndarray, min_sep, jobs: int = 1) -> np.ndarray:
    """Sorted distinct values of ``|p - q| >= min_sep`` over pairs of ``pos``.

    Integer positions give exact integer separations; float positions are
    returned as-is (rounded duplicates are harmless for rasterization).
    """
    pos = np.asarray(pos)
    n = len(pos)
    _check_pairs(n * (n - 1) // 2)
    if n < 2:
        return pos[:0]

    def block(lo, hi):
        d = np.abs(pos[lo:hi, None] - pos[None, :])
        return np.unique(d[d >= min_sep])

    parts = _run_blocks(block, n, jobs)
    return np.unique(np.concatenate(parts)) if parts else pos[:0]


# --------------------------------------------------------------------------
# windows


def _window(index: np.ndarray, L: int, centre: Fraction, radius: int, circle: bool) -> np.ndarray:
    """Lifted indices ``j`` of cylinders ``[j, j+1]`` meeting ``[centre - r, centre + r]`` (units)."""
    lo = math.ceil(centre - radius - 1)
    hi = math.floor(centre + radius)
    shifts = (-1, 0, 1) if circle else (0,)
    out = []
    for m in shifts:
        a = np.searchsorted(index, lo - m * L, side="left")
        b = np.searchsorted(index, hi - m * L, side="right")
        if b > a:
            out.append(index[a:b] + m * L)
    if not out:
        return index[:0]
    return np.unique(np.concatenate(out))


def _point_units(x: PointSpec, a: int, depth: int) -> Fraction:
    return x.value(a) * a**depth


def local_difference_set(
    sys: DigitSystem,
    x: PointSpec,
    params: LocalDiffParams,
    b: int | None = None,
    *,
    circle: bool = True,
    cover: Cover | None = None,
    jobs: int = 1,
) -> CircleSet:
    """Finite-scale approximation of the local difference set of ``sys`` at ``x``.

    ``b`` is the base of the phase (defaults to the system base). With
    ``circle=False`` the set is treated as a subset of the real line, with
    no wraparound through 0.
    """
    if not x.admissible(sys):
        raise DomainError(f"point {x} is not admissible in the system")
    a = sys.base
    b = a if b is None else int(b)
    n = params.depth
    if cover is None:
        cover = cover_at_depth(sys, n)
    elif cover.depth != n or not cover.adic:
        raise DomainError("cover depth does not match the parameters")
    L = a**n
    X = _point_units(x, a, n)
    M = params.resolution
    out = None
    for k in params.scales(a, b):
        sel = _window(cover.index, L, X, a ** (n - k), circle)
        deltas = distinct_separations(sel, a**params.guard, jobs)
        Dk = phase_set(deltas, n, a, b, M, params.rigorous).dilate(params.dilation)
        out = Dk if out is None else out & Dk
        if not out:
            break
    return out


def aggregate_local_difference_set(
    sys: DigitSystem,
    params: LocalDiffParams,
    b: int | None = None,
    net_depth: int = DEFAULT_NET_DEPTH,
    *,
    circle: bool = True,
    jobs: int = 1,
) -> CircleSet:
    """Union of local difference sets over one canonical point per depth-``net_depth`` cylinder."""
    cover = cover_at_depth(sys, params.depth)
    out = CircleSet.empty(params.resolution)
    for x in canonical_points(sys, net_depth):
        out = out | local_difference_set(sys, x, params, b, circle=circle, cover=cover, jobs=jobs)
    return out


def window_difference_set(
    pos,
    lo,
    hi,
    centre: float,
    scale: float,
    depth: int,
    a: int,
    params: LocalDiffParams,
    b: int | None = None,
    jobs: int = 1,
) -> CircleSet:
    """Local difference set of an arbitrary interval cover on the real line.

    ``pos``, ``lo``, ``hi`` and ``centre`` are in units of ``a^-depth``.
    Ball radii and the pair threshold are multiplied by ``scale``, which
    is how image covers are read at the image's own scale.
    """
    b = a if b is None else int(b)
    pos, lo, hi = (np.asarray(v, dtype=np.longdouble) for v in (pos, lo, hi))
    M = params.resolution
    out = None
    for k in params.scales(a, b):
        r = scale * a ** (depth - k)
        sel = pos[(hi >= centre - r) & (lo <= centre + r)]
        deltas = distinct_separations(np.sort(sel), scale * a**params.guard, jobs)
        Dk = phase_set(deltas, depth, a, b, M, params.rigorous).dilate(params.dilation)
        out = Dk if out is None else out & Dk
        if not out:
            break
    return out


# --------------------------------------------------------------------------
# global difference sets


def difference_set(cover: Cover, M: int = DEFAULT_RESOLUTION, jobs: int = 1) -> CircleSet:
    """Outer approximation of ``X - X mod 1`` from an adic cover.

    Differences of cylinder representatives ``(j - j') a^-n`` are
    rasterized and dilated by ``max(1, ceil(M a^-n))`` cells, which
    contains every true difference. Covers of finite systems carry their
    exact points and give the exact rasterization.
    """
    if not cover.adic:
        raise DomainError("difference_set needs an adic cover")
    if cover.points is not None:
        pts = np.array([float(p) for p in cover.points])
        diffs = np.mod(pts[:, None] - pts[None, :], 1.0).ravel()
        return CircleSet.from_indices(cell_of(diffs, M), M)
    L = cover.scale
    J = cover.index
    n = len(J)
    _check_pairs(n * n)
    if L > 2**33:
        raise DepthTooLarge(f"depth too large: {L} cells for the difference table")

    def block(lo, hi):
        hit = np.zeros(L, dtype=bool)
        hit[np.mod(J[lo:hi, None] - J[None, :], L).ravel()] = True
        return hit

    hit = np.zeros(L, dtype=bool)
    for part in _run_blocks(block, n, jobs):
        hit |= part
    deltas = np.flatnonzero(hit)
    cells = CircleSet.from_indices(cell_of(deltas / np.longdouble(L), M), M)
    return cells.dilate(max(1, math.ceil(M / L)))


def difference_depth(base: int, M: int) -> int:
    """Smallest depth whose cylinders are no wider than one cell."""
    n = 0
    while base**n < M:
        n += 1
    return n


def self_restricted_test(sys: DigitSystem, depth: int, M: int = DEFAULT_RESOLUTION, jobs: int = 1):
    """One-sided test of ``X - X != [0, 1] mod 1``.

    Returns ``(restricted, gap)``. An empty cell of the outer
    approximation proves the set is self-restricted; a full circle at
    resolution ``M`` proves nothing.
    """
    D = difference_set(cover_at_depth(sys, depth), M, jobs)
    return (not D.is_full(), max_gap(D))
