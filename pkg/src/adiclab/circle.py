"""Finite-resolution subsets of the circle R/Z.

A :class:`CircleSet` of resolution ``M`` is a boolean array whose cell ``i``
stands for the arc ``[i/M, (i+1)/M)``. All operations return new sets.
"""

from __future__ import annotations

import io
import math
from typing import Iterable

import numpy as np

from .errors import DomainError, ParseError


class CircleSet:
    """Immutable bit array of ``M`` equal arcs."""

    __slots__ = ("_cells",)

    def __init__(self, cells):
        cells = np.array(cells, dtype=bool, copy=True)
        if cells.ndim != 1 or len(cells) < 2:
            raise DomainError("invalid resolution: need a 1-d cell array with M >= 2")
        cells.setflags(write=False)
        self._cells = cells

    @classmethod
    def empty(cls, M: int) -> "CircleSet":
        _check_resolution(M)
        return cls(np.zeros(M, dtype=bool))

    @classmethod
    def full(cls, M: int) -> "CircleSet":
        _check_resolution(M)
        return cls(np.ones(M, dtype=bool))

    @classmethod
    def from_indices(cls, indices: Iterable[int], M: int) -> "CircleSet":
        _check_resolution(M)
        cells = np.zeros(M, dtype=bool)
        idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices, dtype=np.int64)
        cells[np.mod(idx, M)] = True
        return cls(cells)

    @property
    def cells(self) -> np.ndarray:
        return self._cells

    @property
    def resolution(self) -> int:
        return len(self._cells)

    M = resolution

    def __len__(self):
        return int(self._cells.sum())

    count = property(__len__)

    def __bool__(self):
        return bool(self._cells.any())

    def __eq__(self, other):
        if not isinstance(other, CircleSet):
            return NotImplemented
        return self.resolution == other.resolution and bool(np.array_equal(self._cells, other._cells))

    def __hash__(self):
        return hash((self.resolution, self._cells.tobytes()))

    def __repr__(self):
        return f"CircleSet(M={self.resolution}, count={self.count})"

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self._cells)

    def midpoints(self) -> np.ndarray:
        return (self.indices() + 0.5) / self.resolution

    def is_full(self) -> bool:
        return bool(self._cells.all())

    # set algebra -------------------------------------------------------

    def _same(self, other):
        if self.resolution != other.resolution:
            raise DomainError("circle sets have different resolutions")

    def __or__(self, other):
        self._same(other)
        return CircleSet(self._cells | other._cells)

    def __and__(self, other):
        self._same(other)
        return CircleSet(self._cells & other._cells)

    def __invert__(self):
        return CircleSet(~self._cells)

    union = __or__
    intersection = __and__
    complement = __invert__

    def issubset(self, other) -> bool:
        self._same(other)
        return not bool(np.any(self._cells & ~other._cells))

    __le__ = issubset

    def dilate(self, cells: int) -> "CircleSet":
        """Mark every cell within ``cells`` cells of a marked one."""
        cells = int(cells)
        if cells < 0:
            raise DomainError("dilation must be non-negative")
        M = self.resolution
        if cells == 0 or not self:
            return self
        if 2 * cells + 1 >= M:
            return CircleSet.full(M)
        # a cell is marked iff some marked cell lies in the window [i-c, i+c]
        c = np.concatenate([self._cells[-cells:], self._cells, self._cells[:cells]]).astype(np.int64)
        csum = np.concatenate([[0], np.cumsum(c)])
        w = 2 * cells + 1
        return CircleSet((csum[w:] - csum[:-w]) > 0)

    def dilate_eps(self, epsilon: float) -> "CircleSet":
        """Dilation by ``ceil(epsilon * M)`` cells."""
        return self.dilate(int(math.ceil(epsilon * self.resolution - 1e-9)))

    def coarsen(self, factor: int) -> "CircleSet":
        """Resolution ``M / factor``: a coarse cell is marked iff one of its fine cells is."""
        M = self.resolution
        if M % factor:
            raise DomainError(f"resolution {M} is not divisible by {factor}")
        return CircleSet(self._cells.reshape(M // factor, factor).any(axis=1))


def _check_resolution(M):
    if int(M) != M or M < 2:
        raise DomainError(f"invalid resolution {M!r}: need an integer >= 2")


def cell_of(values, M: int) -> np.ndarray:
    """Cell index ``floor(v M) mod M`` of each value."""
    v = np.mod(np.asarray(values, dtype=np.longdouble), 1)
    return np.mod(np.floor(v * M).astype(np.int64), M)


def rasterize(values=(), M: int = 2**16, intervals=()) -> CircleSet:
    """Mark every cell meeting one of the points or closed arcs.

    ``intervals`` are ``(lo, hi)`` pairs reduced mod 1; ``lo > hi`` denotes an
    arc that wraps through 0. Arcs of length >= 1 mark the whole circle.

    >>> rasterize([0.5], 4).indices().tolist()
    [2]
    """
    _check_resolution(M)
    cells = np.zeros(M, dtype=bool)
    values = np.asarray(values, dtype=np.longdouble).ravel()
    if values.size:
        cells[cell_of(values, M)] = True
    for lo, hi in intervals:
        _mark_arc(cells, lo, hi, M)
    return CircleSet(cells)


def rasterize_arcs(lo, hi, M: int) -> CircleSet:
    """Vectorised :func:`rasterize` for arrays of arc endpoints (``hi - lo`` is the arc length)."""
    _check_resolution(M)
    lo = np.asarray(lo, dtype=np.longdouble)
    hi = np.asarray(hi, dtype=np.longdouble)
    cells = np.zeros(M, dtype=bool)
    if lo.size == 0:
        return CircleSet(cells)
    if np.any(hi - lo >= 1):
        return CircleSet.full(M)
    start = np.floor(lo * M).astype(np.int64)
    stop = np.floor(hi * M).astype(np.int64)
    # difference array over an unrolled circle of length 2M
    diff = np.zeros(2 * M + 2, dtype=np.int64)
    base = np.mod(start, M)
    span = stop - start
    np.add.at(diff, base, 1)
    np.add.at(diff, base + span + 1, -1)
    cover = np.cumsum(diff)[: 2 * M] > 0
    return CircleSet(cover[:M] | cover[M:])


def _mark_arc(cells, lo, hi, M):
    lo, hi = float(lo), float(hi)
    if hi < lo:
        hi += 1.0
    if hi - lo >= 1:
        cells[:] = True
        return
    i0, i1 = math.floor(lo * M), math.floor(hi * M)
    cells[np.mod(np.arange(i0, i1 + 1), M)] = True


def rotate(S: CircleSet, t: float) -> CircleSet:
    """Circular shift by ``round(t M)`` cells."""
    k = int(round(float(t) * S.resolution))
    return CircleSet(np.roll(S.cells, k))


def _runs_of_empty(cells) -> int:
    """Longest circular run of ``False`` cells."""
    M = len(cells)
    if not cells.any():
        return M
    if cells.all():
        return 0
    k = int(np.flatnonzero(cells)[0])
    c = np.roll(cells, -k)  # starts with a marked cell
    marked = np.flatnonzero(c)
    gaps = np.diff(np.concatenate([marked, [M]])) - 1
    return int(gaps.max())


def max_gap(S: CircleSet) -> float:
    """Length of the longest arc of empty cells (1 for the empty set)."""
    return _runs_of_empty(S.cells) / S.resolution


def _nearest_marked_distance(cells) -> np.ndarray:
    """Circular distance (in cells) from every cell to the nearest marked cell."""
    M = len(cells)
    marked = np.flatnonzero(cells)
    idx = np.arange(M)
    pos = np.searchsorted(marked, idx)
    right = marked[pos % len(marked)]
    left = marked[(pos - 1) % len(marked)]
    d1 = np.mod(right - idx, M)
    d2 = np.mod(idx - left, M)
    return np.minimum(d1, d2)


def hausdorff_distance(A: CircleSet, B: CircleSet) -> float:
    """Circular Hausdorff distance, measured between cell indices."""
    if A.resolution != B.resolution:
        raise DomainError("circle sets have different resolutions")
    if not A or not B:
        raise DomainError("Hausdorff distance needs non-empty operands")
    dA = _nearest_marked_distance(A.cells)
    dB = _nearest_marked_distance(B.cells)
    return max(int(dB[A.cells].max()), int(dA[B.cells].max())) / A.resolution


def one_sided_excess(A: CircleSet, B: CircleSet) -> float:
    """``max_{a in A} dist(a, B)``; zero iff ``A`` is contained in ``B``."""
    if not A:
        return 0.0
    if not B:
        return 1.0
    return int(_nearest_marked_distance(B.cells)[A.cells].max()) / A.resolution


def box_counts(S: CircleSet, levels: Iterable[int]) -> dict[int, int]:
    """Occupied cells after coarsening to resolution ``2**j`` for each ``j``."""
    M = S.resolution
    out = {}
    for j in levels:
        m = 2**j
        if M % m:
            raise DomainError(f"resolution {M} is not divisible by 2**{j}")
        out[j] = len(S.coarsen(M // m))
    return out


# --------------------------------------------------------------------------
# text formats


def dumps(S: CircleSet) -> str:
    """``circleset M=<M> count=<n>`` header plus the little-endian packed bits in hex."""
    packed = np.packbits(S.cells.astype(np.uint8), bitorder="little")
    return f"circleset M={S.resolution} count={S.count}\n{packed.tobytes().hex()}\n"


def loads(text: str) -> CircleSet:
    lines = text.strip().splitlines()
    if len(lines) != 2 or not lines[0].startswith("circleset "):
        raise ParseError("not a circleset dump", 1, 1)
    try:
        fields = dict(item.split("=", 1) for item in lines[0].split()[1:])
        M, count = int(fields["M"]), int(fields["count"])
        raw = np.frombuffer(bytes.fromhex(lines[1]), dtype=np.uint8)
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed circleset dump: {exc}", 1, 1) from exc
    bits = np.unpackbits(raw, bitorder="little")[:M].astype(bool)
    if len(bits) != M:
        raise ParseError("bit array shorter than the declared resolution", 2, 1)
    S = CircleSet(bits)
    if S.count != count:
        raise ParseError(f"header count {count} does not match {S.count} marked cells", 1, 1)
    return S


def to_csv(S: CircleSet) -> str:
    """CSV of marked cells and their midpoints."""
    buf = io.StringIO()
    buf.write("cell,midpoint\n")
    M = S.resolution
    for i in S.indices():
        buf.write(f"{int(i)},{(int(i) + 0.5) / M!r}\n")
    return buf.getvalue()
