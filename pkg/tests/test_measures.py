import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adiclab.errors import DomainError, PreconditionError
from adiclab.maps import SmoothMap, shipped_map
from adiclab.measures import (
    BLOCK_SIZE,
    EmpiricalCloud,
    cesaro_pushforward_samples,
    dimension_gain_experiment,
    entropy_at_scale,
    histogram,
    markov_from_system,
    sample_measure,
    shipped_measure,
)
from adiclab.symbolic import DigitSystem

from . import oracles


def tv_from_uniform(points, depth, base):
    h = histogram(points, depth, base)
    return 0.5 * np.abs(h / h.sum() - 1 / len(h)).sum()


def tv(p, q, depth, base):
    hp, hq = histogram(p, depth, base), histogram(q, depth, base)
    return 0.5 * np.abs(hp / hp.sum() - hq / hq.sum()).sum()


# measures -------------------------------------------------------------------------


def test_shipped_dimensions():
    assert shipped_measure("lebesgue").dimension == pytest.approx(1, abs=1e-12)
    assert shipped_measure("cantor").dimension == pytest.approx(math.log(2) / math.log(3), abs=1e-12)
    assert shipped_measure("golden_parry").dimension == pytest.approx(oracles.golden_dimension(), abs=1e-10)


def test_parry_maximizes_entropy(golden):
    uniform = markov_from_system(golden, "uniform")
    parry = markov_from_system(golden, "parry")
    assert uniform.entropy < parry.entropy
    # uniform branching: 1/2 from the free state, 1 after a 1; stationary law (2/3, 1/3)
    assert uniform.entropy == pytest.approx(2 / 3 * math.log(2), abs=1e-12)


@pytest.mark.parametrize("name", ["lebesgue", "cantor", "golden_parry"])
def test_stochastic_and_stationary(name):
    mu = shipped_measure(name)
    Q = mu.state_matrix()
    live = mu.stationary > 0
    assert np.allclose(mu.transition[live].sum(axis=1), 1)
    assert np.allclose(mu.stationary @ Q, mu.stationary)
    assert mu.stationary.sum() == pytest.approx(1)


@given(st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=3, max_size=3))
def test_explicit_weights(w):
    full3 = DigitSystem.from_forbidden_words(3, [])
    mu = markov_from_system(full3, np.array([w]))
    p = np.array(w) / sum(w)
    assert np.allclose(mu.transition[0], p)
    assert mu.entropy == pytest.approx(-(p * np.log(p)).sum(), abs=1e-12)


def test_weights_validation(cantor, countable):
    with pytest.raises(DomainError, match="forbids"):
        markov_from_system(cantor, np.array([[1.0, 1.0, 1.0]]))
    with pytest.raises(DomainError, match="shape"):
        markov_from_system(cantor, np.ones((2, 3)))
    with pytest.raises(DomainError, match="unknown weights"):
        markov_from_system(cantor, "gibbs")
    with pytest.raises(DomainError, match="transitive"):
        markov_from_system(countable)
    with pytest.raises(DomainError):
        shipped_measure("haar")


# sampling -------------------------------------------------------------------------------


def test_lebesgue_samples_are_uniform():
    cloud = sample_measure(shipped_measure("lebesgue"), 100_000, seed=1)
    assert tv_from_uniform(cloud.points, 6, 2) <= 0.02
    assert np.all((cloud.points >= 0) & (cloud.points < 1))


def test_cantor_samples_avoid_forbidden_cylinders():
    cloud = sample_measure(shipped_measure("cantor"), 50_000, seed=2)
    h = histogram(cloud.points, 6, 3)
    for j in np.flatnonzero(h):
        assert "1" not in np.base_repr(int(j), 3).zfill(6)


@pytest.mark.parametrize("name", ["lebesgue", "cantor", "golden_parry"])
def test_shift_invariance_of_samples(name):
    mu = shipped_measure(name)
    pts = sample_measure(mu, 100_000, seed=3).points
    shifted = np.mod(pts * mu.base, 1.0)
    assert tv(pts, shifted, 5, mu.base) <= 0.03


def test_cesaro_identity_on_lebesgue():
    cloud = cesaro_pushforward_samples(shipped_measure("lebesgue"), None, 8, 100_000, seed=4)
    assert tv_from_uniform(cloud.points, 6, 2) <= 0.02
    assert cloud.provenance["map"] == "identity"


def test_single_iterate_stays_in_image():
    cloud = cesaro_pushforward_samples(shipped_measure("cantor"), shipped_map("third"), 1, 20_000, seed=5)
    assert cloud.points.max() <= 1 / 3 + 1e-15
    assert cloud.provenance["clamped"] == 0


def test_clamping_is_counted():
    cloud = cesaro_pushforward_samples(shipped_measure("lebesgue"), SmoothMap.affine(2, 0.0), 1, 10_000, seed=6)
    assert 0.4 < cloud.provenance["clamped"] / 10_000 < 0.6


def test_seed_determinism_and_jobs():
    mu = shipped_measure("golden_parry")
    S = BLOCK_SIZE * 2 + 123
    a = sample_measure(mu, S, seed=7, jobs=1).points
    b = sample_measure(mu, S, seed=7, jobs=3).points
    c = sample_measure(mu, S, seed=8, jobs=1).points
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    f = shipped_map("logistic")
    p = cesaro_pushforward_samples(mu, f, 5, S, seed=7, jobs=1).points
    q = cesaro_pushforward_samples(mu, f, 5, S, seed=7, jobs=4).points
    assert np.array_equal(p, q)


def test_sampling_limits():
    mu = shipped_measure("lebesgue")
    with pytest.raises(DomainError):
        sample_measure(mu, 0)
    with pytest.raises(DomainError):
        sample_measure(mu, 10**8 + 1)
    with pytest.raises(DomainError):
        cesaro_pushforward_samples(mu, None, 0, 100)


def test_csv():
    cloud = EmpiricalCloud(np.array([0.25, 0.5]), 0)
    assert cloud.to_csv() == "x\n0.25\n0.5\n"


# entropy at scale ----------------------------------------------------------------------


def test_entropy_of_uniform_grid():
    pts = (np.arange(2**15) + 0.5) / 2**15
    est = entropy_at_scale(pts, 8, 2)
    # every cylinder holds 128 points: plug-in entropy is exactly 8 log 2
    assert est.dimension == pytest.approx(1 + 255 / (2 * 2**15 * 8 * math.log(2)), abs=1e-12)
    assert est.occupied == 256 and not est.undersampled


def test_entropy_of_point_mass():
    est = entropy_at_scale(np.full(1000, 0.3), 4, 3)
    assert est.dimension == 0 and est.stderr == 0


def test_entropy_refuses_undersampling():
    with pytest.raises(DomainError, match="undersampled"):
        entropy_at_scale(np.linspace(0, 1, 100, endpoint=False), 8, 2)
    assert entropy_at_scale(np.linspace(0, 1, 300, endpoint=False), 8, 2).undersampled


def test_entropy_of_cantor_samples():
    cloud = sample_measure(shipped_measure("cantor"), 200_000, seed=9)
    est = entropy_at_scale(cloud, 6, 3)
    assert est.dimension == pytest.approx(math.log(2) / math.log(3), abs=0.02)
    assert est.stderr < 0.01


@given(st.lists(st.floats(min_value=0, max_value=1, exclude_max=True), min_size=64, max_size=400))
def test_entropy_dimension_ceiling(pts):
    depth, base = 2, 3
    est = entropy_at_scale(np.array(pts), depth, base)
    L = base**depth
    correction = (L - 1) / (2 * len(pts) * depth * math.log(base))
    assert 0 <= est.dimension <= 1 + correction + 1e-12


# dimension-gain proxy --------------------------------------------------------------------


def test_dimension_gain_preconditions():
    with pytest.raises(PreconditionError, match="curved"):
        dimension_gain_experiment(shipped_measure("cantor"), shipped_map("affine_2x"))
    with pytest.raises(PreconditionError, match="not in"):
        dimension_gain_experiment(shipped_measure("lebesgue"), shipped_map("logistic"))


def test_dimension_gain_report_fields():
    rep = dimension_gain_experiment(shipped_measure("cantor"), shipped_map("logistic"), N=6, S=100_000, depth=6)
    d = rep.to_dict()
    assert d["margin"] == pytest.approx(d["estimate"] - d["s"])
    assert "Proxy" in d["disclaimer"]
