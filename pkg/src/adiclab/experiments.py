"""Verification experiments built on covers, maps and local difference sets."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

from .adic import adic_frac, circular_distance, commensurability
from .circle import (
    CircleSet,
    box_counts,
    cell_of,
    hausdorff_distance,
    max_gap,
    one_sided_excess,
    rotate,
)
from .diffsets import (
    DEFAULT_GUARD,
    DEFAULT_NET_DEPTH,
    DEFAULT_RESOLUTION,
    LocalDiffParams,
    aggregate_local_difference_set,
    default_depth,
    difference_depth,
    difference_set,
    local_difference_set,
    window_difference_set,
)
from .errors import DomainError, PreconditionError
from .maps import SmoothMap, eval_map, image_cover
from .symbolic import DigitSystem, PointSpec, canonical_points, classify, cover_at_depth, entropy_exact

# ---------------------------------------------------------------------------
# transformation law


@dataclass
class TransformReport:
    shift_predicted: float
    distance: float | None
    depth: int
    resolution: int
    tolerance: float
    verdict: str
    source_cells: int
    image_cells: int

    def to_dict(self):
        return asdict(self)


def image_local_difference_set(
    sys: DigitSystem,
    f: SmoothMap,
    x: PointSpec,
    params: LocalDiffParams,
    b: int | None = None,
    jobs: int = 1,
) -> CircleSet:
    """Local difference set of ``f(X)`` at ``f(x)``, read from the image cover.

    Pairs are image representatives ``f(m)`` of cylinder midpoints; balls
    and the pair threshold are scaled by ``|f'(x)|``.
    """
    a = sys.base
    n = params.depth
    cover = cover_at_depth(sys, n)
    img = image_cover(cover, f)
    L = np.longdouble(a) ** n
    pos = np.sort(f(cover.midpoints())) * L
    fx, dfx = eval_map(f, float(x.value(a)))
    # a relative slack keeps cylinders touching the ball boundary
    slack = 1e-9
    return window_difference_set(
        pos,
        img.lo * L - slack,
        img.hi * L + slack,
        np.longdouble(fx) * L,
        abs(dfx),
        n,
        a,
        params,
        b,
        jobs,
    )


def verify_transform_law(
    sys: DigitSystem,
    f: SmoothMap,
    x: PointSpec,
    params: LocalDiffParams,
    tol: float = 0.02,
    jobs: int = 1,
) -> TransformReport:
    """Compare the local difference set of ``f(X)`` at ``f(x)`` with the rotated source set.

    Distances scale by ``f'(x)`` to first order, so scale phases move by
    ``-log_a |f'(x)|``; that is the predicted rotation. Both sides are
    computed on the real line (no wraparound), because ``f`` acts on the
    line.
    """
    a = sys.base
    _, dfx = eval_map(f, float(x.value(a)))
    shift = adic_frac(dfx, a).value
    src = local_difference_set(sys, x, params, circle=False, jobs=jobs)
    img = image_local_difference_set(sys, f, x, params, jobs=jobs)
    if not src or not img:
        dist, verdict = None, "inconclusive"
    else:
        dist = hausdorff_distance(img, rotate(src, shift))
        verdict = "pass" if dist <= tol else "fail"
    return TransformReport(shift, dist, params.depth, params.resolution, tol, verdict, src.count, img.count)


# ---------------------------------------------------------------------------
# full-circle claim


def guard_schedule(depth: int) -> int:
    """Guard used by the full-circle experiment at each depth.

    The phase error of a pair is about ``a^-g / ln b``; a guard growing
    with the depth lets the aggregate set sharpen as the depth increases.
    """
    return max(DEFAULT_GUARD, depth // 2 - 1)


@dataclass
class FullCircleReport:
    base: int
    b: int
    resolution: int
    rows: list = field(default_factory=list)
    monotone: bool = True
    final_gap: float | None = None
    mechanism: list = field(default_factory=list)
    vacuous: bool = False
    note: str = ""

    @property
    def mechanism_ok(self) -> bool:
        return all(m["ok"] for m in self.mechanism)

    def to_dict(self):
        d = asdict(self)
        d["mechanism_ok"] = self.mechanism_ok
        return d


def _params(depth, M, guard=None, epsilon=None, rigorous=False):
    g = guard_schedule(depth) if guard is None else guard
    return LocalDiffParams(depth=depth, guard=g, resolution=M, epsilon=epsilon, rigorous=rigorous)


def claim_full_circle(
    sys: DigitSystem,
    b: int,
    depths,
    M: int = DEFAULT_RESOLUTION,
    *,
    guard: int | None = None,
    epsilon: float | None = None,
    rigorous: bool = False,
    net_depth: int = DEFAULT_NET_DEPTH,
    mechanism_steps: int = 3,
    jobs: int = 1,
) -> FullCircleReport:
    """Gap trend of the aggregate local difference set in base ``b``.

    Reports the largest empty arc per depth and whether it is
    non-increasing. The mechanism check verifies, at the deepest depth,
    that the set at ``T_a^n x0`` contains the set at ``x0`` rotated by
    ``-n log_b a`` up to two cells. With ``rigorous`` every pair marks
    the whole arc of phases its cylinders allow.
    """
    a = sys.base
    if commensurability(a, b).related:
        raise PreconditionError(f"bases {a} and {b} are commensurable")
    depths = sorted(int(d) for d in depths)
    rep = FullCircleReport(a, int(b), M)
    if classify(sys).finite:
        rep.vacuous = True
        rep.note = "finite set: no pairs of distinct points accumulate, the claim is vacuous"
        for d in depths:
            rep.rows.append({"depth": d, "guard": None, "count": 0, "max_gap": 1.0})
        rep.final_gap = 1.0
        return rep
    for d in depths:
        p = _params(d, M, guard, epsilon, rigorous)
        S = aggregate_local_difference_set(sys, p, b, net_depth, jobs=jobs)
        rep.rows.append({"depth": d, "guard": p.guard, "count": S.count, "max_gap": max_gap(S)})
    gaps = [r["max_gap"] for r in rep.rows]
    rep.monotone = all(g2 <= g1 for g1, g2 in zip(gaps, gaps[1:]))
    rep.final_gap = gaps[-1] if gaps else None
    if depths:
        rep.mechanism = _mechanism(sys, b, _params(depths[-1], M, guard, epsilon, rigorous), net_depth, mechanism_steps, jobs)
    return rep


def _mechanism(sys, b, p, net_depth, steps, jobs):
    a = sys.base
    M = p.resolution
    cover = cover_at_depth(sys, p.depth)
    x0, F0 = None, None
    for x in canonical_points(sys, net_depth):
        F = local_difference_set(sys, x, p, b, cover=cover, jobs=jobs)
        if F:
            x0, F0 = x, F
            break
    if x0 is None:
        return []
    out = []
    for n in range(1, steps + 1):
        try:
            q = replace(p, depth=p.depth - n, inner_scale=max(1, p.inner_scale - n))
            q.scales(a, b)
        except DomainError:
            break
        shift = -n * math.log(a) / math.log(b)
        expected = rotate(F0, shift)
        got = local_difference_set(sys, x0.shift(n), q, b, jobs=jobs)
        excess = one_sided_excess(expected, got) * M
        out.append({"n": n, "point": str(x0.shift(n)), "excess_cells": int(round(excess)), "ok": excess <= 2})
    return out


# ---------------------------------------------------------------------------
# inclusion of scale phases in the difference set


@dataclass
class InclusionReport:
    b: int
    depth: int
    resolution: int
    marked: int
    violations: int
    worst_cells: int

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self):
        d = asdict(self)
        d["ok"] = self.ok
        return d


def check_inclusion_prop(
    sys: DigitSystem,
    b: int,
    depth: int | None = None,
    M: int = DEFAULT_RESOLUTION,
    *,
    net_depth: int = 6,
    tol_cells: int = 2,
    jobs: int = 1,
) -> InclusionReport:
    """Every marked phase ``t`` of the aggregate set must map to ``b^-t`` inside ``X - X``.

    A marked cell counts as a violation when no cell of the difference set
    lies within ``tol_cells`` of the cell of ``b^-t`` for ``t`` its midpoint.
    """
    a = sys.base
    depth = default_depth(a) if depth is None else depth
    p = LocalDiffParams(depth=depth, resolution=M)
    F = aggregate_local_difference_set(sys, p, b, net_depth, jobs=jobs)
    D = difference_set(cover_at_depth(sys, difference_depth(a, M)), M, jobs)
    if not F:
        return InclusionReport(int(b), depth, M, 0, 0, 0)
    t = F.midpoints()
    v = np.mod(np.power(float(b), -t), 1.0)
    cells = cell_of(v, M)
    if not D:
        return InclusionReport(int(b), depth, M, len(t), len(t), M)
    from .circle import _nearest_marked_distance

    dist = _nearest_marked_distance(D.cells)[cells]
    return InclusionReport(int(b), depth, M, len(t), int((dist > tol_cells).sum()), int(dist.max()))


# ---------------------------------------------------------------------------
# dimension inequality under a smooth map


@dataclass
class DimInequalityReport:
    b: int
    depth: int
    resolution: int
    dim_image: float | None
    dim_source: float | None
    bdim: float
    slack: float
    holds: bool | None
    verdict: str
    per_depth: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _box_slope(S: CircleSet, levels) -> float | None:
    counts = box_counts(S, levels)
    js = [j for j in levels if counts[j] > 0]
    if len(js) < 3:
        return None
    x = np.array(js, dtype=float) * math.log(2)
    y = np.log([counts[j] for j in js])
    return float(np.polyfit(x, y, 1)[0])


def check_map_dim_inequality(
    sysX: DigitSystem,
    f: SmoothMap,
    depths,
    M: int = DEFAULT_RESOLUTION,
    b: int = 2,
    *,
    net_depth: int = DEFAULT_NET_DEPTH,
    slack: float = 0.05,
    jobs: int = 1,
) -> DimInequalityReport:
    """Box-count dimensions of the aggregate sets of ``X`` and ``f(X)`` in base ``b``.

    Both sides are computed on the real line from the same net of points;
    the image side reads the image cover at ``f(x)``. The inequality
    ``dim image >= dim source - bdim X`` is checked at the deepest depth
    with the given slack.
    """
    a = sysX.base
    bdim = entropy_exact(sysX)[1]
    k = int(round(math.log2(M)))
    if 2**k != M:
        raise DomainError("resolution must be a power of two for box counting")
    levels = list(range(4, max(4, k - 3) + 1))
    rows = []
    for d in sorted(int(v) for v in depths):
        p = LocalDiffParams(depth=d, resolution=M)
        cover = cover_at_depth(sysX, d)
        src = CircleSet.empty(M)
        img = CircleSet.empty(M)
        for x in canonical_points(sysX, net_depth):
            src = src | local_difference_set(sysX, x, p, b, circle=False, cover=cover, jobs=jobs)
            img = img | image_local_difference_set(sysX, f, x, p, b, jobs=jobs)
        rows.append(
            {
                "depth": d,
                "source_cells": src.count,
                "image_cells": img.count,
                "dim_source": _box_slope(src, levels),
                "dim_image": _box_slope(img, levels),
            }
        )
    last = rows[-1]
    ds, di = last["dim_source"], last["dim_image"]
    if ds is None or di is None:
        holds, verdict = None, "inconclusive"
    else:
        holds = di >= ds - bdim - slack
        verdict = "pass" if holds else "fail"
    return DimInequalityReport(int(b), last["depth"], M, di, ds, bdim, slack, holds, verdict, rows)


# ---------------------------------------------------------------------------
# affine self-embeddings


@dataclass
class AffineResult:
    r: str
    t: str
    passes: bool
    refuted_at: int | None
    commensurable: bool | None = None
    ratio: str | None = None
    phase_distance: float | None = None

    def to_dict(self):
        return asdict(self)


AFFINE_LIMITATION = (
    "Passing is only a failure to refute f(X) within X at the tested depth; "
    "the density statement about f' is not observable at finite resolution, "
    "so only the commensurability pattern of surviving maps is reported."
)


def default_r_grid(max_q: int = 9, bound: int = 3) -> list[Fraction]:
    rs = sorted({Fraction(p, q) for q in range(1, max_q + 1) for p in range(1, bound * q + 1)})
    return [-r for r in reversed(rs)] + rs


def default_t_grid(count: int = 729) -> list[Fraction]:
    return [Fraction(j, count) for j in range(count)]


def _rational_grid_distance(v: float, max_q: int = 16) -> float:
    best = 1.0
    for q in range(1, max_q + 1):
        p = round(v * q)
        best = min(best, circular_distance(v, p / q))
    return best


def _commensurability_fields(r, a):
    r_abs = abs(Fraction(r)) if isinstance(r, (int, Fraction)) else None
    if r_abs is None:
        approx = Fraction(abs(float(r))).limit_denominator(1000)
        if abs(float(approx) - abs(float(r))) < 1e-12:
            r_abs = approx
    if r_abs is not None and r_abs.numerator <= 10**6 and r_abs.denominator <= 10**6:
        v = commensurability(r_abs, a)
        return v.related, (None if v.ratio is None else str(v.ratio)), None
    return None, None, _rational_grid_distance(adic_frac(float(r), a).value)


def affine_embedding_search(
    sys: DigitSystem,
    r_grid=None,
    t_grid=None,
    depth: int = 10,
    *,
    jobs: int = 1,
) -> list[AffineResult]:
    """Refute affine self-embeddings ``x -> r x + t`` depth by depth.

    At depth ``d`` a pair survives iff the image of every depth-``d``
    cylinder lies in the one-cell dilation of the depth-``d`` cover.
    Results are ordered by grid index (``r`` major).
    """
    a = sys.base
    r_grid = default_r_grid() if r_grid is None else list(r_grid)
    t_grid = default_t_grid() if t_grid is None else list(t_grid)
    for r in r_grid:
        if r == 0 or abs(r) > a:
            raise DomainError(f"slope {r} outside (0, {a}] in absolute value")
    t = np.array([float(v) for v in t_grid], dtype=np.float64)
    refuted = np.full((len(r_grid), len(t)), 0, dtype=np.int64)
    alive = np.ones((len(r_grid), len(t)), dtype=bool)
    eps = 1e-9
    for d in range(1, depth + 1):
        cover = cover_at_depth(sys, d)
        L = a**d
        marked = np.zeros(L + 2, dtype=np.int64)  # cells -1 .. L
        J = cover.index
        for s in (-1, 0, 1):
            marked[np.clip(J + s, -1, L) + 1] = 1
        marked[0] = marked[-1] = 0
        prefix = np.concatenate([[0], np.cumsum(marked)])
        lo_j = J.astype(np.float64)
        for i, r in enumerate(r_grid):
            live = np.flatnonzero(alive[i])
            if live.size == 0:
                continue
            rf = float(r)
            e0 = rf * lo_j
            e1 = rf * (lo_j + 1)
            ilo = np.minimum(e0, e1)[None, :] + t[live, None] * L
            ihi = np.maximum(e0, e1)[None, :] + t[live, None] * L
            c0 = np.floor(ilo + eps)
            c1 = np.ceil(ihi - eps) - 1
            c1 = np.maximum(c1, c0)
            inside = (c0 >= 0) & (c1 <= L - 1)
            c0i = np.clip(c0, -1, L).astype(np.int64) + 1
            c1i = np.clip(c1, -1, L).astype(np.int64) + 1
            covered = (prefix[c1i + 1] - prefix[c0i]) == (c1i - c0i + 1)
            ok = np.all(inside & covered, axis=1)
            dead = live[~ok]
            alive[i, dead] = False
            refuted[i, dead] = d
    out = []
    for i, r in enumerate(r_grid):
        for k, tv in enumerate(t_grid):
            if alive[i, k]:
                rel, ratio, dist = _commensurability_fields(r, a)
                out.append(AffineResult(str(r), str(tv), True, None, rel, ratio, dist))
            else:
                out.append(AffineResult(str(r), str(tv), False, int(refuted[i, k])))
    return out
