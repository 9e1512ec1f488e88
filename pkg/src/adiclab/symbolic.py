"""Closed T_a-invariant sets as one-sided shift spaces over base-a digits.

A :class:`DigitSystem` is a digit-labelled automaton. The set it describes
is ``X = {sum d_i a^-i : d_1 d_2 ... labels an infinite path}``, where paths
may start at any origin state. Every state keeps at least one outgoing edge
(the automaton is pruned to its essential part), so ``X`` is closed; when
the origin set is closed under taking successors the language is factorial
and ``X`` is T_a-invariant.

Word counting and cover enumeration run on the subset-construction DFA, so
that each admissible word is counted once even for nondeterministic input.
"""

from __future__ import annotations

import json
import math
import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DepthTooLarge, DomainError, EmptySetError, NumericalError, ParseError

MAX_COVER = 10**8


# --------------------------------------------------------------------------
# automata


@dataclass(frozen=True)
class DigitSystem:
    """Pruned digit automaton describing a closed T_a-invariant set.

    ``edges`` holds ``(src, digit, dst)`` triples over states
    ``0 .. n_states - 1``; ``origin`` is the set of start states.
    """

    base: int
    n_states: int
    edges: tuple[tuple[int, int, int], ...]
    origin: frozenset[int]
    name: str = ""
    state_names: tuple[str, ...] = ()

    @classmethod
    def from_edges(cls, base, edges, origin=None, name="", state_names=None):
        """Build a system from raw edges, pruning dead and unreachable states."""
        base = int(base)
        if base < 2:
            raise ParseError(f"base must be >= 2, got {base}")
        edges = {(int(s), int(d), int(t)) for s, d, t in edges}
        for s, d, t in edges:
            if not 0 <= d < base:
                raise ParseError(f"digit {d} out of range for base {base}")
        states = {s for s, _, _ in edges} | {t for _, _, t in edges}
        if origin is None:
            origin = set(states)
        origin = set(origin)

        # prune states without an infinite continuation
        alive = set(states)
        while True:
            has_out = {s for s, _, t in edges if s in alive and t in alive}
            if has_out == alive:
                break
            alive = has_out
        edges = {e for e in edges if e[0] in alive and e[2] in alive}
        origin &= alive
        if not origin:
            raise EmptySetError("the automaton accepts no infinite sequence (empty set)")

        # keep states reachable from the origin
        succ: dict[int, list[int]] = {}
        for s, _, t in edges:
            succ.setdefault(s, []).append(t)
        seen, todo = set(origin), list(origin)
        while todo:
            for t in succ.get(todo.pop(), ()):
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        order = sorted(seen)
        relabel = {s: i for i, s in enumerate(order)}
        new_edges = tuple(sorted((relabel[s], d, relabel[t]) for s, d, t in edges if s in seen))
        names = tuple(
            (state_names[s] if state_names is not None else str(s)) for s in order
        )
        return cls(
            base=base,
            n_states=len(order),
            edges=new_edges,
            origin=frozenset(relabel[s] for s in origin),
            name=name,
            state_names=names,
        )

    @classmethod
    def from_forbidden_words(cls, base, words, name=""):
        """Subshift avoiding every word in ``words`` (strings of digits or digit lists).

        States are the proper prefixes of forbidden words; a transition
        appends a digit and keeps the longest suffix that is still such a
        prefix. The empty word is the single origin.
        """
        base = int(base)
        forb = []
        for w in words:
            digits = tuple(_digits_of(w, base))
            if not digits:
                raise ParseError("forbidden words must be non-empty")
            forb.append(digits)
        forb_set = set(forb)
        prefixes = sorted({()} | {w[:i] for w in forb for i in range(len(w))}, key=lambda p: (len(p), p))
        index = {p: i for i, p in enumerate(prefixes)}
        edges = []
        for p in prefixes:
            for d in range(base):
                w = p + (d,)
                if any(w[i:] in forb_set for i in range(len(w))):
                    continue
                for i in range(len(w) + 1):
                    if w[i:] in index:
                        edges.append((index[p], d, index[w[i:]]))
                        break
        names = ["".join(map(str, p)) or "e" for p in prefixes]
        return cls.from_edges(base, edges, origin=[index[()]], name=name, state_names=names)

    # -- derived structure -------------------------------------------------

    @cached_property
    def dfa(self) -> "Dfa":
        return Dfa.from_system(self)

    def disjoint_union(self, other: "DigitSystem", name="") -> "DigitSystem":
        if other.base != self.base:
            raise DomainError("disjoint union needs a common base")
        k = self.n_states
        edges = list(self.edges) + [(s + k, d, t + k) for s, d, t in other.edges]
        origin = set(self.origin) | {s + k for s in other.origin}
        names = list(self.state_names) + [f"'{n}" for n in other.state_names]
        return DigitSystem.from_edges(self.base, edges, origin, name=name, state_names=names)


def _digits_of(word, base):
    if isinstance(word, str):
        out = []
        for ch in word:
            if not ch.isdigit() and not ch.isalpha():
                raise ParseError(f"bad digit character {ch!r}")
            d = int(ch, 36)
            if d >= base:
                raise ParseError(f"digit {d} out of range for base {base}")
            out.append(d)
        return out
    out = [int(d) for d in word]
    for d in out:
        if not 0 <= d < base:
            raise ParseError(f"digit {d} out of range for base {base}")
    return out


@dataclass(frozen=True, eq=False)
class Dfa:
    """Deterministic automaton with start state 0; ``trans[s, d] == -1`` means no edge."""

    base: int
    trans: np.ndarray

    @classmethod
    def from_system(cls, sys: DigitSystem) -> "Dfa":
        succ: dict[tuple[int, int], set[int]] = {}
        for s, d, t in sys.edges:
            succ.setdefault((s, d), set()).add(t)
        start = frozenset(sys.origin)
        ids = {start: 0}
        rows = []
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            row = []
            for d in range(sys.base):
                nxt = frozenset(t for s in cur for t in succ.get((s, d), ()))
                if not nxt:
                    row.append(-1)
                    continue
                if nxt not in ids:
                    ids[nxt] = len(ids)
                    queue.append(nxt)
                row.append(ids[nxt])
            rows.append(row)
        trans = np.array(rows, dtype=np.int64)
        trans.setflags(write=False)
        return cls(sys.base, trans)

    @property
    def n_states(self) -> int:
        return self.trans.shape[0]

    def adjacency(self) -> np.ndarray:
        """Edge-count matrix (parallel edges with different digits add up)."""
        n = self.n_states
        A = np.zeros((n, n), dtype=np.int64)
        for s in range(n):
            for t in self.trans[s]:
                if t >= 0:
                    A[s, t] += 1
        return A

    def step(self, state: int, digits) -> int:
        for d in digits:
            if state < 0:
                return -1
            state = int(self.trans[state, d])
        return state

    def components(self):
        """Strongly connected components: (labels, list of nontrivial component ids)."""
        A = self.adjacency()
        n_comp, labels = connected_components(csr_matrix(A), directed=True, connection="strong")
        nontrivial = []
        for c in range(n_comp):
            members = np.flatnonzero(labels == c)
            if len(members) > 1 or A[members[0], members[0]] > 0:
                nontrivial.append(c)
        return labels, nontrivial


# --------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class PointSpec:
    """The eventually periodic digit sequence ``preperiod . period^inf``."""

    preperiod: tuple[int, ...]
    period: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "preperiod", tuple(int(d) for d in self.preperiod))
        object.__setattr__(self, "period", tuple(int(d) for d in self.period))
        if not self.period:
            raise DomainError("a point needs a non-empty period")

    @classmethod
    def parse(cls, text: str) -> "PointSpec":
        """Parse ``"02(1)"``-style notation: preperiod digits then the period in parentheses.

        A bare digit string is read as a purely periodic point.
        """
        text = text.strip()
        if "(" in text:
            if not text.endswith(")"):
                raise ParseError(f"bad point notation {text!r}")
            pre, per = text[:-1].split("(", 1)
        else:
            pre, per = "", text
        try:
            return cls(tuple(int(c, 36) for c in pre), tuple(int(c, 36) for c in per))
        except ValueError as exc:
            raise ParseError(f"bad point notation {text!r}") from exc

    def __str__(self):
        f = lambda w: "".join(np.base_repr(d, 36).lower() for d in w)  # noqa: E731
        return f"{f(self.preperiod)}({f(self.period)})"

    def value(self, base: int) -> Fraction:
        """Exact value in [0, 1]."""
        m, p = len(self.preperiod), len(self.period)
        pre = _word_int(self.preperiod, base)
        per = _word_int(self.period, base)
        return (pre + Fraction(per, base**p - 1)) / base**m

    def shift(self, n: int = 1) -> "PointSpec":
        """Digit sequence of ``T_a^n x``."""
        pre = self.preperiod
        if n <= len(pre):
            return PointSpec(pre[n:], self.period)
        n = (n - len(pre)) % len(self.period)
        return PointSpec((), self.period[n:] + self.period[:n])

    def digits(self, n: int) -> list[int]:
        out = list(self.preperiod[:n])
        while len(out) < n:
            out.extend(self.period)
        return out[:n]

    def admissible(self, sys: DigitSystem) -> bool:
        if any(d >= sys.base for d in self.preperiod + self.period):
            return False
        dfa = sys.dfa
        s = dfa.step(0, self.preperiod)
        seen = set()
        while s >= 0 and s not in seen:
            seen.add(s)
            s = dfa.step(s, self.period)
        return s >= 0


def _word_int(word, base):
    v = 0
    for d in word:
        v = v * base + d
    return v


def continuation(sys: DigitSystem, state: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Smallest-digit infinite path from a DFA state as (transient word, cycle word)."""
    trans = sys.dfa.trans
    path, visited = [], {}
    s = state
    while s not in visited:
        visited[s] = len(path)
        d = int(np.flatnonzero(trans[s] >= 0)[0])
        path.append(d)
        s = int(trans[s, d])
    i = visited[s]
    return tuple(path[:i]), tuple(path[i:])


def canonical_point(sys: DigitSystem, word) -> PointSpec:
    """Canonical admissible point of the cylinder ``[word]``."""
    word = tuple(int(d) for d in word)
    s = sys.dfa.step(0, word)
    if s < 0:
        raise DomainError(f"word {word} is not admissible")
    pre, per = continuation(sys, s)
    return PointSpec(word + pre, per)


def canonical_points(sys: DigitSystem, m: int) -> list[PointSpec]:
    """One canonical point per depth-``m`` cylinder, in cylinder order."""
    cov = cover_at_depth(sys, m)
    return [canonical_point(sys, w) for w in cov.words()]


def random_points(sys: DigitSystem, count: int, rng, depth: int = 24) -> list[PointSpec]:
    """Random admissible points: ``depth`` uniformly chosen edges, then the canonical tail."""
    trans = sys.dfa.trans
    out = []
    for _ in range(count):
        s, word = 0, []
        for _ in range(depth):
            opts = np.flatnonzero(trans[s] >= 0)
            d = int(opts[rng.integers(len(opts))])
            word.append(d)
            s = int(trans[s, d])
        pre, per = continuation(sys, s)
        out.append(PointSpec(tuple(word) + pre, per))
    return out


def finite_points(sys: DigitSystem) -> list[PointSpec]:
    """All points of a finite system (raises for infinite systems)."""
    if not classify(sys).finite:
        raise DomainError("system is infinite")
    trans = sys.dfa.trans
    labels, nontrivial = sys.dfa.components()
    cyclic = set(nontrivial)
    out = []
    stack = [(0, ())]
    while stack:
        s, word = stack.pop()
        if labels[s] in cyclic:
            pre, per = continuation(sys, s)
            out.append(PointSpec(word + pre, per))
            continue
        for d in range(sys.base - 1, -1, -1):
            t = int(trans[s, d])
            if t >= 0:
                stack.append((t, word + (d,)))
    return sorted(out, key=lambda p: p.value(sys.base))


# --------------------------------------------------------------------------
# covers and counting


@dataclass(frozen=True, eq=False)
class Cover:
    """Finite list of closed intervals over-approximating a set.

    ``lo``/``hi`` are endpoints in [0, 1] (float). For adic covers ``index``
    holds the integer ``j`` of each cylinder ``[j a^-n, (j+1) a^-n]`` and
    ``state`` the DFA state reached after its word. Covers of finite
    systems also carry the exact ``points`` of the set.
    """

    base: int
    depth: int
    lo: np.ndarray
    hi: np.ndarray
    adic: bool = True
    index: np.ndarray | None = None
    state: np.ndarray | None = None
    points: tuple[Fraction, ...] | None = None

    def __len__(self):
        return len(self.lo)

    @property
    def scale(self) -> int:
        return self.base**self.depth

    @property
    def intervals(self) -> list[tuple]:
        if self.adic:
            L = self.scale
            return [(Fraction(int(j), L), Fraction(int(j) + 1, L)) for j in self.index]
        return list(zip(self.lo.tolist(), self.hi.tolist()))

    def words(self) -> list[tuple[int, ...]]:
        if not self.adic:
            raise DomainError("only adic covers carry words")
        return [tuple(int(c) for c in np.base_repr(int(j), self.base).zfill(self.depth)) if self.depth else ()
                for j in self.index]

    @property
    def total_length(self) -> float:
        return float(np.sum(self.hi - self.lo))

    def midpoints(self) -> np.ndarray:
        return (self.lo + self.hi) / 2


def word_counts(sys: DigitSystem, n: int) -> list[int]:
    """Number of admissible words of each length ``0 .. n`` (exact integers)."""
    trans = sys.dfa.trans
    vec = {0: 1}
    out = [1]
    for _ in range(n):
        nxt: dict[int, int] = {}
        for s, c in vec.items():
            for t in trans[s]:
                if t >= 0:
                    nxt[int(t)] = nxt.get(int(t), 0) + c
        vec = nxt
        out.append(sum(vec.values()))
    return out


def cover_at_depth(sys: DigitSystem, n: int, max_count: int | None = None) -> Cover:
    """All admissible depth-``n`` cylinders, sorted by left endpoint."""
    if n < 0:
        raise DomainError("depth must be >= 0")
    cap = MAX_COVER if max_count is None else max_count
    count = word_counts(sys, n)[-1]
    if count > cap:
        raise DepthTooLarge(f"depth too large: {count} cylinders at depth {n} (cap {cap})")
    a = sys.base
    trans = sys.dfa.trans
    idx = np.zeros(1, dtype=np.int64)
    st = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        nxt = trans[st]  # (k, a)
        rows, digs = np.nonzero(nxt >= 0)
        idx = idx[rows] * a + digs
        st = nxt[rows, digs]
    order = np.argsort(idx, kind="stable")
    idx, st = idx[order], st[order]
    L = a**n
    lo = idx / L
    hi = (idx + 1) / L
    points = None
    if classify(sys).finite:
        points = tuple(p.value(a) for p in finite_points(sys))
    return Cover(a, n, lo, hi, True, idx, st, points)


# --------------------------------------------------------------------------
# entropy, dimension, classification


def perron_root(A: np.ndarray, rtol: float = 1e-12, max_iter: int = 200_000) -> float:
    """Perron root of an irreducible nonnegative matrix.

    Power iteration on ``A + I`` (primitive whenever ``A`` is irreducible),
    stopped by the Collatz-Wielandt bracket ``min(Bv/v) <= rho <= max(Bv/v)``.
    """
    A = np.asarray(A, dtype=float)
    B = A + np.eye(len(A))
    v = np.ones(len(A))
    lo = hi = float("nan")
    for it in range(max_iter):
        w = B @ v
        ratios = w / v
        lo, hi = ratios.min(), ratios.max()
        if hi - lo <= rtol * (lo - 1) or hi - lo <= 1e-15 * hi:
            return float((lo + hi) / 2 - 1)
        v = w / w.sum()
    raise NumericalError(
        f"power iteration did not converge after {max_iter} steps: bracket [{lo - 1}, {hi - 1}]"
    )


def entropy_exact(sys: DigitSystem) -> tuple[float, float]:
    """Topological entropy ``h`` and dimension ``h / log a``.

    The Perron root is taken component by component over the strongly
    connected parts of the DFA; finite systems give ``h = 0``.
    """
    dfa = sys.dfa
    A = dfa.adjacency()
    labels, nontrivial = dfa.components()
    rho = 1.0
    for c in nontrivial:
        members = np.flatnonzero(labels == c)
        rho = max(rho, perron_root(A[np.ix_(members, members)]))
    h = math.log(rho)
    if h < 1e-14:
        h = 0.0
    return h, h / math.log(sys.base)


class Classification(NamedTuple):
    finite: bool
    perfect: bool
    transitive: bool


def classify(sys: DigitSystem) -> Classification:
    """Graph criteria for finiteness, perfectness and transitivity.

    * finite: every cyclic component is a simple cycle and no cyclic
      component reaches another one;
    * transitive: exactly one cyclic component;
    * perfect: every state reaches a branching state, i.e. no cylinder
      contains a single admissible sequence (branching always shows up
      within ``n_states`` steps).
    """
    dfa = sys.dfa
    A = dfa.adjacency()
    n = dfa.n_states
    labels, nontrivial = dfa.components()

    reach = _reachability(A)
    simple = True
    for c in nontrivial:
        members = np.flatnonzero(labels == c)
        inner = A[np.ix_(members, members)]
        if np.any(inner.sum(axis=1) != 1):
            simple = False
    cross = False
    for c in nontrivial:
        m = np.flatnonzero(labels == c)[0]
        for c2 in nontrivial:
            if c2 != c and reach[m, np.flatnonzero(labels == c2)[0]]:
                cross = True
    finite = simple and not cross

    outdeg = A.sum(axis=1)
    branching = outdeg >= 2
    perfect = bool(n > 0 and all(reach[s][branching].any() for s in range(n)))
    return Classification(finite=finite, perfect=perfect, transitive=len(nontrivial) == 1)


def _reachability(A):
    n = len(A)
    R = (A > 0) | np.eye(n, dtype=bool)
    for _ in range(max(1, int(math.ceil(math.log2(max(n, 2)))) + 1)):
        R = R | ((R.astype(np.int64) @ R.astype(np.int64)) > 0)
    return R


@dataclass
class DimensionEstimate:
    """Box-counting regression of ``log count`` against ``n log a``."""

    counts: dict[int, int]
    slope: float
    residual: float
    exact: float | None = None
    intercept: float = 0.0

    @property
    def deviation(self) -> float | None:
        return None if self.exact is None else abs(self.slope - self.exact)


def box_count_estimate(counts: dict[int, int], base, exact: float | None = None) -> DimensionEstimate:
    """Least-squares slope of ``log N_n`` versus ``n log a`` (RMS residual reported)."""
    if len(counts) < 3:
        raise DomainError("box counting needs at least 3 depths")
    depths = sorted(counts)
    if any(counts[d] <= 0 for d in depths):
        raise DomainError("box counts must be positive")
    x = np.array(depths, dtype=float) * math.log(base)
    y = np.log(np.array([counts[d] for d in depths], dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return DimensionEstimate(
        counts={d: int(counts[d]) for d in depths},
        slope=float(slope),
        residual=float(np.sqrt(np.mean(resid**2))),
        exact=exact,
        intercept=float(intercept),
    )


# --------------------------------------------------------------------------
# set-definition documents


def parse_system(doc, source: str | None = None) -> DigitSystem:
    """Build a :class:`DigitSystem` from a set-definition document.

    ``doc`` is a JSON string or an already decoded mapping with keys
    ``base``, ``mode`` (``forbidden_words`` or ``automaton``), ``words`` or
    ``states``/``edges``/``origin``, and optional ``name``.
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, exc.colno, source) from exc
    if not isinstance(doc, dict):
        raise ParseError("set definition must be a JSON object", source=source)

    def need(key):
        if key not in doc:
            raise ParseError(f"missing field {key!r}", source=source)
        return doc[key]

    base = need("base")
    if not isinstance(base, int) or isinstance(base, bool) or base < 2:
        raise ParseError(f"field 'base' must be an integer >= 2, got {base!r}", source=source)
    mode = need("mode")
    name = str(doc.get("name", ""))
    try:
        if mode == "forbidden_words":
            words = need("words")
            if not isinstance(words, list):
                raise ParseError("field 'words' must be a list", source=source)
            return DigitSystem.from_forbidden_words(base, words, name=name)
        if mode == "automaton":
            states = [str(s) for s in need("states")]
            pos = {s: i for i, s in enumerate(states)}
            edges = []
            for k, e in enumerate(need("edges")):
                if not isinstance(e, list) or len(e) != 3:
                    raise ParseError(f"edges[{k}] must be [src, digit, dst]", source=source)
                s, d, t = str(e[0]), e[1], str(e[2])
                if s not in pos or t not in pos:
                    raise ParseError(f"edges[{k}] names an undeclared state", source=source)
                if not isinstance(d, int) or not 0 <= d < base:
                    raise ParseError(f"edges[{k}]: digit {d!r} out of range for base {base}", source=source)
                edges.append((pos[s], d, pos[t]))
            origin = doc.get("origin")
            if origin is not None:
                bad = [o for o in origin if str(o) not in pos]
                if bad:
                    raise ParseError(f"origin names undeclared states {bad}", source=source)
                origin = [pos[str(o)] for o in origin]
            return DigitSystem.from_edges(base, edges, origin, name=name, state_names=states)
    except EmptySetError as exc:
        raise EmptySetError(str(exc), source=source) from None
    except ParseError as exc:
        if exc.source is None:
            raise ParseError(str(exc), source=source) from None
        raise
    raise ParseError(f"unknown mode {mode!r}", source=source)


def load_system(path) -> DigitSystem:
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read set definition: {exc.strerror}", source=path) from exc
    return parse_system(text, source=path)


def shipped_system(name: str) -> DigitSystem:
    """Load one of the example systems bundled in ``adiclab/data``."""
    return load_system(data_path(f"{name}.set.json"))


def data_path(filename: str) -> str:
    return os.path.join(os.path.dirname(__file__), "data", filename)
