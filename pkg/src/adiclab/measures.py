"""Markov measures on digit systems, Cesaro push-forward samples and
entropy-at-scale dimension estimates."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError
from .maps import SmoothMap
from .symbolic import DigitSystem, shipped_system

SPARE_DIGITS = 40
BLOCK_SIZE = 1 << 16
MAX_SAMPLES = 10**8

PROXY_DISCLAIMER = (
    "Proxy experiment: the Cesaro average is replaced by a uniformly random "
    "iterate index and dimension by normalized cylinder entropy at one scale. "
    "The expected dimension gain has no explicit size, so only the sign of the "
    "margin is meaningful (margin > 0 expected); it is not a quantitative check."
)


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    """Markov measure on the essential part of a transitive digit system.

    ``transition[s, d]`` is the probability of digit ``d`` from DFA state
    ``s``; ``stationary`` is the stationary law on states. States outside
    the recurrent class carry zero mass.
    """

    system: DigitSystem
    transition: np.ndarray
    stationary: np.ndarray
    entropy: float
    name: str = ""

    @property
    def base(self) -> int:
        return self.system.base

    @property
    def dimension(self) -> float:
        return self.entropy / math.log(self.base)

    def state_matrix(self) -> np.ndarray:
        """Row-stochastic state-to-state matrix."""
        trans = self.system.dfa.trans
        S = trans.shape[0]
        Q = np.zeros((S, S))
        for s in range(S):
            for d in np.flatnonzero(trans[s] >= 0):
                Q[s, trans[s, d]] += self.transition[s, d]
        return Q


def _recurrent_states(sys: DigitSystem) -> np.ndarray:
    labels, nontrivial = sys.dfa.components()
    if len(nontrivial) != 1:
        raise DomainError(
            "system is not transitive: ergodicity of a Markov measure is not guaranteed"
        )
    return np.flatnonzero(labels == nontrivial[0])


def markov_from_system(sys: DigitSystem, weights="uniform", name: str = "") -> MarkovMeasure:
    """Markov measure with ``uniform``, ``parry`` or explicit digit weights.

    Explicit weights are an array of shape ``(n_states, base)`` over DFA
    states; each row is normalized and must vanish off the automaton edges.
    """
    trans = sys.dfa.trans
    S, a = trans.shape
    rec = _recurrent_states(sys)
    inrec = np.zeros(S, dtype=bool)
    inrec[rec] = True
    # edges that stay inside the recurrent class
    edge = (trans >= 0) & inrec[:, None] & inrec[np.where(trans >= 0, trans, 0)]
    P = np.zeros((S, a))
    if isinstance(weights, str) and weights == "uniform":
        P[edge] = 1.0
    elif isinstance(weights, str) and weights == "parry":
        A = np.zeros((S, S))
        for s in rec:
            for d in np.flatnonzero(edge[s]):
                A[s, trans[s, d]] += 1
        sub = A[np.ix_(rec, rec)]
        vals, vecs = np.linalg.eig(sub)
        k = int(np.argmax(vals.real))
        rho = float(vals[k].real)
        v = np.abs(vecs[:, k].real)
        full = np.zeros(S)
        full[rec] = v
        for s in rec:
            for d in np.flatnonzero(edge[s]):
                P[s, d] = full[trans[s, d]] / (rho * full[s])
    elif isinstance(weights, str):
        raise DomainError(f"unknown weights {weights!r}: use 'uniform', 'parry' or an array")
    else:
        W = np.asarray(weights, dtype=float)
        if W.shape != (S, a) or np.any(W < 0):
            raise DomainError(f"explicit weights must be a non-negative array of shape {(S, a)}")
        if np.any(W[~(trans >= 0)] > 0):
            raise DomainError("weights put mass on digits the automaton forbids")
        P = np.where(edge, W, 0.0)
    rows = P[rec].sum(axis=1)
    if np.any(rows <= 0):
        raise DomainError("a recurrent state has no positive-weight digit")
    P[rec] /= rows[:, None]
    # stationary law of the state chain restricted to the recurrent class
    Q = np.zeros((S, S))
    for s in rec:
        for d in np.flatnonzero(P[s] > 0):
            Q[s, trans[s, d]] += P[s, d]
    sub = Q[np.ix_(rec, rec)]
    vals, vecs = np.linalg.eig(sub.T)
    k = int(np.argmin(np.abs(vals - 1)))
    pi = np.abs(vecs[:, k].real)
    pi /= pi.sum()
    stationary = np.zeros(S)
    stationary[rec] = pi
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(P > 0, np.log(np.where(P > 0, P, 1)), 0.0)
    h = float(-(stationary[:, None] * P * logs).sum())
    P.setflags(write=False)
    stationary.setflags(write=False)
    return MarkovMeasure(sys, P, stationary, max(h, 0.0), name or sys.name)


def shipped_measure(name: str) -> MarkovMeasure:
    """``lebesgue`` (full shift base 2), ``cantor`` (uniform on {0, 2}) or ``golden_parry``."""
    table = {
        "lebesgue": ("full2", "uniform"),
        "cantor": ("cantor3", "uniform"),
        "golden_parry": ("golden_mean", "parry"),
    }
    if name not in table:
        raise DomainError(f"unknown measure {name!r}; shipped: {sorted(table)}")
    sysname, w = table[name]
    return markov_from_system(shipped_system(sysname), w, name=name)


SHIPPED_MEASURES = ("lebesgue", "cantor", "golden_parry")


# ---------------------------------------------------------------------------
# sampling


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block)]))


def sample_digits(mu: MarkovMeasure, count: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` digit sequences of ``length`` digits, started from the stationary law."""
    trans = mu.system.dfa.trans
    cum = np.cumsum(mu.transition, axis=1)
    cum[:, -1] = np.where(cum[:, -1] > 0, 1.0, 0.0)
    states = rng.choice(len(mu.stationary), size=count, p=mu.stationary)
    out = np.empty((count, length), dtype=np.int8)
    for i in range(length):
        u = rng.random(count)
        d = (u[:, None] >= cum[states]).sum(axis=1)
        d = np.minimum(d, trans.shape[1] - 1)
        out[:, i] = d
        states = trans[states, d]
    return out


def _digits_value(digits: np.ndarray, base: int) -> np.ndarray:
    v = np.zeros(digits.shape[0], dtype=np.longdouble)
    inv = np.longdouble(1) / base
    for i in range(digits.shape[1] - 1, -1, -1):
        v = (v + digits[:, i]) * inv
    return v


@dataclass
class EmpiricalCloud:
    """Sample points in [0, 1) with the seed and a description of how they were drawn."""

    points: np.ndarray
    seed: int
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def to_csv(self) -> str:
        return "x\n" + "".join(f"{float(v)!r}\n" for v in self.points)


def _finish(values) -> np.ndarray:
    pts = np.asarray(values, dtype=np.float64)
    # long-double values just below 1 may round up in double precision
    return np.minimum(pts, np.nextafter(1.0, 0.0))


def _run(fn, count, jobs):
    blocks = [(k, min(BLOCK_SIZE, count - k * BLOCK_SIZE)) for k in range((count + BLOCK_SIZE - 1) // BLOCK_SIZE)]
    if jobs <= 1 or len(blocks) <= 1:
        return [fn(k, m) for k, m in blocks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda km: fn(*km), blocks))


def _check_samples(S):
    if not 1 <= S <= MAX_SAMPLES:
        raise DomainError(f"sample count {S} outside [1, {MAX_SAMPLES}]")


def sample_measure(mu: MarkovMeasure, S: int, seed: int = 0, jobs: int = 1) -> EmpiricalCloud:
    """Direct samples of ``mu`` (``SPARE_DIGITS`` digits each)."""
    _check_samples(S)

    def block(k, m):
        rng = _block_rng(seed, k)
        return _finish(_digits_value(sample_digits(mu, m, SPARE_DIGITS, rng), mu.base))

    pts = np.concatenate(_run(block, S, jobs))
    prov = {"pipeline": "direct samples", "measure": mu.name, "digits": SPARE_DIGITS, "samples": S}
    return EmpiricalCloud(pts, seed, prov)


def cesaro_pushforward_samples(
    mu: MarkovMeasure, f: SmoothMap | None, N: int, S: int, seed: int = 0, jobs: int = 1
) -> EmpiricalCloud:
    """Samples of ``(1/N) sum_{n<N} T_a^n (f mu)``.

    Each sample draws ``N + 40`` digits from ``mu``, maps the point through
    ``f`` and applies ``T_a^n`` for ``n`` uniform in ``[0, N)``. With the
    identity map the shift is applied to the digits exactly. Images
    outside ``[0, 1)`` are clamped and counted in the provenance.
    Blocks use seeds derived from ``(seed, block)``, so the cloud does not
    depend on ``jobs``.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    _check_samples(S)
    a = mu.base
    identity = f is None or (
        f.is_affine and len(f.pieces) == 1 and f.pieces[0].coeffs == (1.0, 0.0)
    )
    length = N + SPARE_DIGITS

    def block(k, m):
        rng = _block_rng(seed, k)
        digits = sample_digits(mu, m, length, rng)
        n = rng.integers(0, N, size=m)
        if identity:
            cols = n[:, None] + np.arange(SPARE_DIGITS)[None, :]
            return _finish(_digits_value(np.take_along_axis(digits, cols, axis=1), a)), 0
        x = _digits_value(digits, a)
        y = f(x)
        bad = (y < 0) | (y >= 1)
        y = np.clip(y, 0, np.nextafter(np.longdouble(1), 0))
        z = np.mod(y * np.power(np.longdouble(a), n), 1)
        return _finish(z), int(bad.sum())

    parts = _run(block, S, jobs)
    pts = np.concatenate([p for p, _ in parts])
    prov = {
        "pipeline": "cesaro push-forward",
        "measure": mu.name,
        "map": "identity" if identity else (f.name or "map"),
        "N": N,
        "samples": S,
        "digits": length,
        "clamped": sum(c for _, c in parts),
    }
    return EmpiricalCloud(pts, seed, prov)


# ---------------------------------------------------------------------------
# entropy at scale


@dataclass
class EntropyEstimate:
    dimension: float
    stderr: float
    depth: int
    base: int
    samples: int
    occupied: int
    undersampled: bool

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def histogram(points, depth: int, base: int) -> np.ndarray:
    """Counts of the depth-``depth`` base-``base`` cylinders."""
    L = base**depth
    idx = np.floor(np.asarray(points, dtype=np.float64) * L).astype(np.int64)
    return np.bincount(np.clip(idx, 0, L - 1), minlength=L)


def _mm_entropy(counts) -> float:
    S = counts.sum()
    c = counts[counts > 0]
    p = c / S
    return float(-(p * np.log(p)).sum() + (len(c) - 1) / (2 * S))


def entropy_at_scale(cloud, depth: int, base: int, folds: int = 10) -> EntropyEstimate:
    """Miller-Madow cylinder entropy over ``depth log base``.

    Refuses clouds with fewer than ``base**depth`` samples and flags those
    with fewer than ``100 base**depth``. The standard error comes from
    ``folds`` contiguous sub-samples.
    """
    pts = cloud.points if isinstance(cloud, EmpiricalCloud) else np.asarray(cloud)
    S = len(pts)
    L = base**depth
    if S < L:
        raise DomainError(f"undersampled: {S} samples for {L} cylinders (need at least {L})")
    scale = depth * math.log(base)
    dim = _mm_entropy(histogram(pts, depth, base)) / scale
    ests = [
        _mm_entropy(histogram(part, depth, base)) / scale
        for part in np.array_split(pts, folds)
        if len(part)
    ]
    se = float(np.std(ests, ddof=1) / math.sqrt(len(ests))) if len(ests) > 1 else 0.0
    occupied = int((histogram(pts, depth, base) > 0).sum())
    return EntropyEstimate(dim, se, depth, base, S, occupied, S < 100 * L)


# ---------------------------------------------------------------------------
# dimension-gain proxy


@dataclass
class DimensionGainReport:
    s: float
    estimate: float
    stderr: float
    margin: float
    N: int
    samples: int
    depth: int
    seed: int
    clamped: int
    disclaimer: str = PROXY_DISCLAIMER

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def dimension_gain_experiment(
    mu: MarkovMeasure,
    f: SmoothMap,
    N: int = 12,
    S: int = 10**6,
    depth: int = 8,
    seed: int = 0,
    jobs: int = 1,
) -> DimensionGainReport:
    """Entropy-at-scale dimension of the Cesaro-averaged push-forward, against ``dim mu``."""
    if not f.piecewise_curved:
        raise PreconditionError("the map must be piecewise curved (nonzero curvature on every piece)")
    s = mu.dimension
    if not 0 < s < 1:
        raise PreconditionError(f"measure dimension {s:.6f} is not in (0, 1)")
    cloud = cesaro_pushforward_samples(mu, f, N, S, seed, jobs)
    est = entropy_at_scale(cloud, depth, mu.base)
    return DimensionGainReport(
        s, est.dimension, est.stderr, est.dimension - s, N, S, depth, seed, cloud.provenance["clamped"]
    )
