import numpy as np
import pytest

from lwf.core import OffspringLaw, random_interior_points
from lwf.discrete import DiscreteModel, empirical_drift
from lwf.rng import RngStream
from lwf.rules import LogisticRule, NegFreqDepRule, PartialOrderRule, PosFreqDepRule, TransitiveRule
from lwf.selection import (
    DriftFunction,
    cyclic_contest_map,
    mu_food_web,
    mu_from_polynomial,
    mu_logistic,
    mu_negfreq,
    mu_posfreq,
    mu_rps,
    mu_transitive,
    transitive_pair_map,
)


def test_mu_transitive_pair_example():
    assert np.allclose(mu_transitive(1.0, {1: 1.0}, [0.5, 0.5]), [-0.25, 0.25])
    assert np.allclose(mu_transitive(1.0, {1: 1.0}, [0.0, 0.0, 1.0]), 0.0)


def test_mu_logistic_examples():
    P = np.full((3, 3), 0.5)
    pts = random_interior_points(RngStream(1).generator(), 3, 20)
    assert np.allclose(mu_logistic(2.0, P, pts), 0.0, atol=1e-14)
    # K=2 with p_12 = 1: mu_1 = x_1 (1 - x_1)
    assert np.allclose(mu_logistic(1.0, [[0.5, 1.0], [0.0, 0.5]], [0.5, 0.5]), [0.25, -0.25])
    assert np.allclose(mu_logistic(1.0, [[0.5, 1.0], [0.0, 0.5]], [1.0, 0.0]), 0.0)


def test_mu_rps_examples():
    assert np.allclose(mu_rps(1.0, [1 / 3, 1 / 3, 1 / 3]), 0.0)
    assert np.allclose(mu_rps(1.0, [0.5, 0.25, 0.25]), [0.0, 1 / 16, -1 / 16])
    assert np.allclose(mu_rps(1.0, [1.0, 0.0, 0.0]), 0.0)
    with pytest.raises(ValueError):
        mu_rps(1.0, [0.5, 0.5])


def test_mu_food_web_reduces_to_rps_on_the_cycle():
    beats = [(1, 0), (2, 1), (0, 2)]
    pts = random_interior_points(RngStream(2).generator(), 3, 50)
    assert np.allclose(mu_food_web(1.3, beats, pts), mu_rps(1.3, pts), atol=1e-14)


def test_mu_freq_dep_examples():
    for fn in (mu_negfreq, mu_posfreq):
        assert np.allclose(fn(1.0, [0.25, 0.25, 0.25, 0.25]), 0.0, atol=1e-15)
    assert mu_negfreq(1.0, [0.25, 0.75])[0] == pytest.approx(0.1875)
    assert mu_posfreq(1.0, [0.25, 0.75])[0] == pytest.approx(-0.09375)


def test_mu_from_polynomial_trivial_cases():
    from lwf.bernstein import PolynomialMap

    x = np.array([0.2, 0.3, 0.5])
    assert np.allclose(mu_from_polynomial(2.0, PolynomialMap.identity(3), x), 0.0)
    assert np.allclose(mu_from_polynomial(0.0, cyclic_contest_map(), x), 0.0)


def test_polynomial_route_matches_transitive_closed_form():
    pts = random_interior_points(RngStream(3).generator(), 2, 100)
    direct = mu_transitive(1.7, {1: 1.0}, pts)
    poly = mu_from_polynomial(1.7, transitive_pair_map(2), pts)
    assert np.allclose(direct, poly, atol=1e-12)


def test_polynomial_route_matches_rps_closed_form():
    pts = random_interior_points(RngStream(4).generator(), 3, 100)
    assert np.allclose(mu_from_polynomial(0.8, cyclic_contest_map(), pts), mu_rps(0.8, pts), atol=1e-12)


def test_zero_sum_and_absent_type_invariants():
    rng = RngStream(5).generator()
    drifts = [
        DriftFunction.transitive(1.0, {1: 0.5, 2: 0.5}, 4),
        DriftFunction.logistic(1.0, [[0.5, 0.7, 0.2], [0.3, 0.5, 0.6], [0.8, 0.4, 0.5]]),
        DriftFunction.rps(1.0),
        DriftFunction.food_web(1.0, [(1, 0), (2, 0), (3, 1)], 4),
        DriftFunction.negfreq(1.0, 3),
        DriftFunction.posfreq(1.0, 3),
        DriftFunction.from_polynomial(1.0, cyclic_contest_map()),
    ]
    for drift in drifts:
        pts = rng.dirichlet(np.ones(drift.K), size=1000)
        values = drift(pts)
        assert np.allclose(values.sum(axis=1), 0.0, atol=1e-12), drift.kind
        # kill one coordinate and check the drift vanishes there
        killed = pts.copy()
        killed[:, 0] = 0.0
        killed /= killed.sum(axis=1, keepdims=True)
        assert np.allclose(drift(killed)[:, 0], 0.0, atol=1e-12), drift.kind


def test_selection_strength_bounds():
    rng = RngStream(6).generator()
    pts = rng.dirichlet(np.ones(3), size=10_000)
    kappa, increments = 1.3, {1: 0.25, 2: 0.75}
    beta = 0.25 * 1 + 0.75 * 2
    mu = mu_transitive(kappa, increments, pts)
    bound = 2.0 * kappa * beta * pts * (1.0 - pts)
    assert np.all(np.abs(mu) <= bound + 1e-12)
    mu = mu_rps(kappa, pts)
    assert np.all(np.abs(mu) <= 2.0 * kappa * pts * (1.0 - pts) + 1e-12)


def test_kappa_linearity():
    pts = random_interior_points(RngStream(7).generator(), 3, 10)
    assert np.allclose(mu_rps(3.0, pts), 3.0 * mu_rps(1.0, pts))
    assert np.allclose(mu_negfreq(2.0, pts), 2.0 * mu_negfreq(1.0, pts))


@pytest.mark.parametrize(
    "rule,tail,drift",
    [
        (TransitiveRule(3), {3: 1.0}, DriftFunction.transitive(1.0, {2: 1.0}, 3)),
        (LogisticRule([[0.5, 0.7], [0.3, 0.5]]), {2: 1.0}, DriftFunction.logistic(1.0, [[0.5, 0.7], [0.3, 0.5]])),
        (PartialOrderRule.rps(), {2: 1.0}, DriftFunction.rps(1.0)),
        (NegFreqDepRule(3), {3: 1.0}, DriftFunction.negfreq(1.0, 3)),
        (PosFreqDepRule(3), {3: 1.0}, DriftFunction.posfreq(1.0, 3)),
    ],
    ids=["transitive", "logistic", "rps", "neg", "pos"],
)
def test_closed_forms_match_exact_enumeration_drift(rule, tail, drift):
    # the enumeration route is exact: closed forms must match to rounding
    model = DiscreteModel(N=2, rule=rule, offspring=OffspringLaw(1.0, tail))
    pts = random_interior_points(RngStream(8).generator(), rule.K, 10)
    for x in pts:
        est = empirical_drift(model, x, 1, method="exact")
        assert np.allclose(drift(x), est.values, atol=1e-12)
