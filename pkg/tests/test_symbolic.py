import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from adiclab.errors import DepthTooLarge, DomainError, EmptySetError, ParseError
from adiclab.symbolic import (
    DigitSystem,
    PointSpec,
    box_count_estimate,
    canonical_points,
    classify,
    cover_at_depth,
    entropy_exact,
    finite_points,
    load_system,
    parse_system,
    shipped_system,
    word_counts,
)

from . import oracles

SHIPPED = ["cantor3", "golden_mean", "full2", "fixed0", "period2", "countable3"]
CANONICAL = ["cantor3", "golden_mean", "full2"]


@st.composite
def forbidden_systems(draw):
    base = draw(st.integers(min_value=2, max_value=3))
    digit = st.integers(min_value=0, max_value=base - 1)
    words = draw(
        st.lists(st.lists(digit, min_size=1, max_size=3).map(lambda w: "".join(map(str, w))), max_size=3)
    )
    try:
        return DigitSystem.from_forbidden_words(base, words), words
    except EmptySetError:
        assume(False)


# construction ---------------------------------------------------------------


def test_cantor_automaton():
    C = DigitSystem.from_forbidden_words(3, ["1"])
    assert C.n_states == 1
    assert sorted(d for _, d, _ in C.edges) == [0, 2]


def test_golden_mean_automaton():
    G = DigitSystem.from_forbidden_words(2, ["11"])
    assert G.n_states == 2


def test_empty_set_rejected():
    with pytest.raises(EmptySetError, match="empty set"):
        DigitSystem.from_forbidden_words(2, ["0", "1"])


@given(forbidden_systems())
def test_word_counts_match_brute_force(case):
    sys_, words = case
    for n in range(0, 6):
        assert word_counts(sys_, n)[n] == len(oracles.extendable_words(sys_.base, n, words))


def test_word_counts_brute_force_for_shipped():
    assert word_counts(shipped_system("golden_mean"), 10)[10] == len(oracles.words(2, 10, ["11"]))
    assert word_counts(shipped_system("cantor3"), 7)[7] == len(oracles.words(3, 7, ["1"]))


# covers ---------------------------------------------------------------------


def test_cantor_depth_two_cover(cantor):
    cov = cover_at_depth(cantor, 2)
    assert [lo for lo, _ in cov.intervals] == [Fraction(0), Fraction(2, 9), Fraction(2, 3), Fraction(8, 9)]
    assert all(hi - lo == Fraction(1, 9) for lo, hi in cov.intervals)


def test_cover_counts(full2, golden):
    assert len(cover_at_depth(full2, 3)) == 8
    assert len(cover_at_depth(golden, 3)) == 5


def test_cover_cap(full2):
    with pytest.raises(DepthTooLarge, match="depth too large"):
        cover_at_depth(full2, 12, max_count=1000)


def test_cover_words_match_index(golden):
    cov = cover_at_depth(golden, 6)
    for w, j in zip(cov.words(), cov.index):
        assert oracles.cylinder_index(w, 2) == j
        assert "11" not in "".join(map(str, w))


@pytest.mark.parametrize("name", SHIPPED)
def test_cover_refinement(name):
    sys_ = shipped_system(name)
    a = sys_.base
    for n in range(0, 8):
        parent = set(cover_at_depth(sys_, n).index.tolist())
        child = cover_at_depth(sys_, n + 1).index
        assert all(int(j) // a in parent for j in child)


@given(forbidden_systems())
def test_cover_refinement_random(case):
    sys_, _ = case
    a = sys_.base
    parent = set(cover_at_depth(sys_, 4).index.tolist())
    assert all(int(j) // a in parent for j in cover_at_depth(sys_, 5).index)


@pytest.mark.parametrize("name", SHIPPED)
def test_shift_invariance_witness(name):
    """x -> a x mod 1 sends depth-n cylinders into depth-(n-1) cylinders."""
    sys_ = shipped_system(name)
    a = sys_.base
    for n in range(1, 9):
        target = set(cover_at_depth(sys_, n - 1).index.tolist())
        assert all(int(j) % a ** (n - 1) in target for j in cover_at_depth(sys_, n).index)


@pytest.mark.parametrize("name", SHIPPED)
def test_submultiplicative_counts(name):
    c = word_counts(shipped_system(name), 16)
    for n in range(1, 9):
        for m in range(1, 9):
            assert c[n + m] <= c[n] * c[m]


@given(forbidden_systems())
def test_submultiplicative_random(case):
    sys_, _ = case
    c = word_counts(sys_, 12)
    assert all(c[n + m] <= c[n] * c[m] for n in range(1, 7) for m in range(1, 7))


# entropy ----------------------------------------------------------------------


def test_entropy_examples(cantor, golden):
    full3 = DigitSystem.from_forbidden_words(3, [])
    h, dim = entropy_exact(full3)
    assert h == pytest.approx(math.log(3), abs=1e-12) and dim == pytest.approx(1, abs=1e-12)
    assert entropy_exact(cantor)[1] == pytest.approx(math.log(2) / math.log(3), abs=1e-10)
    assert entropy_exact(golden)[1] == pytest.approx(oracles.golden_dimension(), abs=1e-10)


@pytest.mark.parametrize("name", CANONICAL)
def test_entropy_matches_word_growth(name):
    sys_ = shipped_system(name)
    h, _ = entropy_exact(sys_)
    assert abs(h - math.log(word_counts(sys_, 16)[16]) / 16) <= 0.01


@given(forbidden_systems())
def test_entropy_against_eigenvalues(case):
    sys_, _ = case
    A = sys_.dfa.adjacency()
    rho = max(1.0, float(np.max(np.abs(np.linalg.eigvals(A))))) if len(A) else 1.0
    assert entropy_exact(sys_)[0] == pytest.approx(math.log(rho), abs=1e-9)


# classification ------------------------------------------------------------------


def test_classify_examples(cantor, full2, fixed0):
    c = classify(fixed0)
    assert c.finite and not c.perfect
    c = classify(cantor)
    assert c.transitive and c.perfect and not c.finite
    c = classify(full2)
    assert c.transitive and c.perfect


def test_classify_countable_and_periodic(countable, period2):
    c = classify(countable)
    assert not c.finite and not c.perfect and not c.transitive
    c = classify(period2)
    assert c.finite and c.transitive and not c.perfect


@pytest.mark.parametrize("name", SHIPPED)
def test_finite_iff_zero_dimension_and_bounded_counts(name):
    sys_ = shipped_system(name)
    finite = classify(sys_).finite
    counts = word_counts(sys_, 30)
    bounded = counts[30] == counts[20]
    assert finite == (entropy_exact(sys_)[1] == 0 and bounded)


def test_finite_points(period2, fixed0):
    assert [p.value(2) for p in finite_points(period2)] == [Fraction(1, 3), Fraction(2, 3)]
    assert [p.value(2) for p in finite_points(fixed0)] == [Fraction(0)]
    with pytest.raises(DomainError):
        finite_points(shipped_system("cantor3"))


# box counting ------------------------------------------------------------------


def test_box_count_exact_geometric():
    est = box_count_estimate({n: 2**n for n in range(4, 13)}, 3)
    assert est.slope == pytest.approx(math.log(2) / math.log(3), abs=1e-12)
    assert box_count_estimate({n: 2**n for n in range(4, 13)}, 2).slope == pytest.approx(1, abs=1e-12)


def test_box_count_golden(golden):
    counts = {n: len(cover_at_depth(golden, n)) for n in range(4, 15)}
    est = box_count_estimate(counts, 2, exact=oracles.golden_dimension())
    assert est.deviation <= 0.01


def test_box_count_needs_three_depths():
    with pytest.raises(DomainError):
        box_count_estimate({1: 2, 2: 4}, 2)


# points -----------------------------------------------------------------------------


def test_point_spec_roundtrip():
    p = PointSpec.parse("2(0)")
    assert str(p) == "2(0)"
    assert p.value(3) == Fraction(2, 3)
    assert p.shift(1).value(3) == 0
    assert PointSpec.parse("(01)").value(2) == Fraction(1, 3)


def test_point_admissibility(cantor):
    assert PointSpec.parse("02(2)").admissible(cantor)
    assert not PointSpec.parse("1(0)").admissible(cantor)
    assert not PointSpec.parse("0(5)").admissible(cantor)


def test_canonical_points_lie_in_their_cylinders(golden):
    cov = cover_at_depth(golden, 4)
    for p, (lo, hi) in zip(canonical_points(golden, 4), cov.intervals):
        assert lo <= p.value(2) <= hi
        assert p.admissible(golden)


# documents --------------------------------------------------------------------------


def test_parse_errors_carry_position(tmp_path):
    bad = tmp_path / "bad.set.json"
    bad.write_text('{"base": 3,\n "mode": "forbidden_words",\n "words": ["1",]}')
    with pytest.raises(ParseError) as exc:
        load_system(bad)
    assert exc.value.line == 3 and exc.value.column is not None


def test_parse_validation():
    with pytest.raises(ParseError, match="base"):
        parse_system({"base": 1, "mode": "forbidden_words", "words": []})
    with pytest.raises(ParseError, match="mode"):
        parse_system({"base": 2, "mode": "regex"})
    with pytest.raises(ParseError, match="missing field"):
        parse_system({"base": 2})
    with pytest.raises(EmptySetError):
        parse_system(json.dumps({"base": 2, "mode": "forbidden_words", "words": ["0", "1"]}))


def test_automaton_document():
    doc = {
        "base": 3,
        "mode": "automaton",
        "states": ["A", "B"],
        "edges": [["A", 0, "A"], ["A", 1, "B"], ["B", 0, "B"]],
        "origin": ["A"],
    }
    sys_ = parse_system(doc)
    assert word_counts(sys_, 5) == [1, 2, 3, 4, 5, 6]


def test_missing_file():
    with pytest.raises(ParseError, match="cannot read"):
        load_system("/nonexistent/x.set.json")
