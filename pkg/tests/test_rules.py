import numpy as np
import pytest

from lwf.bernstein import PolynomialMap, bernstein_table, evaluate_bernstein
from lwf.core import OffspringLaw
from lwf.rng import RngStream
from lwf.rules import (
    BernsteinRule,
    LogisticRule,
    NegFreqDepRule,
    NeutralRule,
    PartialOrderRule,
    PosFreqDepRule,
    TransitiveRule,
    TransitiveWithMutationRule,
    bernstein_rule,
    colour_distribution,
    offspring_type_prob,
)
from lwf.selection import cyclic_contest_map, transitive_pair_map


def counts_of(sample, K):
    return np.bincount(np.asarray(sample) - 1, minlength=K)


ALL_RULES = [
    NeutralRule(3),
    TransitiveRule(3),
    LogisticRule([[0.5, 0.7, 0.2], [0.3, 0.5, 0.6], [0.8, 0.4, 0.5]]),
    PartialOrderRule.rps(),
    NegFreqDepRule(3),
    PosFreqDepRule(3),
    bernstein_rule(cyclic_contest_map()),
]


def test_transitive_picks_highest_type():
    assert np.array_equal(colour_distribution(TransitiveRule(3), counts_of([1, 3, 2], 3)), [0, 0, 1])


def test_singleton_is_the_parent_for_mutation_free_rules():
    for rule in ALL_RULES:
        for i in range(rule.K):
            single = np.zeros(rule.K, dtype=int)
            single[i] = 1
            expected = np.zeros(rule.K)
            expected[i] = 1.0
            assert np.allclose(rule.distribution(single), expected), rule.kind


def test_neg_freq_dep_examples():
    rule = NegFreqDepRule(3)
    assert np.array_equal(rule.distribution(counts_of([1, 1, 2], 3)), [0, 1, 0])
    assert np.allclose(rule.distribution(counts_of([1, 2, 3], 3)), [1 / 3, 1 / 3, 1 / 3])


def test_pos_freq_dep_example():
    assert np.array_equal(PosFreqDepRule(3).distribution(counts_of([1, 1, 2], 3)), [1, 0, 0])


def test_logistic_pair_example():
    rule = LogisticRule([[0.5, 0.7], [0.3, 0.5]])
    assert np.allclose(rule.distribution(counts_of([1, 2], 2)), [0.7, 0.3])
    assert np.array_equal(rule.distribution(counts_of([2, 2], 2)), [0, 1])
    with pytest.raises(ValueError):
        rule.distribution(counts_of([1, 1, 2], 2))


def test_logistic_validation():
    with pytest.raises(ValueError):
        LogisticRule([[0.5, 0.6], [0.5, 0.5]])  # rows don't pair to 1
    with pytest.raises(ValueError):
        LogisticRule([[0.4, 0.7], [0.3, 0.5]])  # bad diagonal


def test_rps_cycle():
    rule = PartialOrderRule.rps()
    # 3 < 1 cyclically: a {1, 3} sample goes to type 1
    assert np.array_equal(rule.distribution(counts_of([1, 3], 3)), [1, 0, 0])
    assert np.array_equal(rule.distribution(counts_of([1, 2], 3)), [0, 1, 0])
    assert np.array_equal(rule.distribution(counts_of([2, 3], 3)), [0, 0, 1])
    # full cycle present: no undominated type, fall back to uniform on parents
    assert np.allclose(rule.distribution(counts_of([1, 2, 3], 3)), [1 / 3, 1 / 3, 1 / 3])


def test_partial_order_incomparable_pair_splits_evenly():
    rule = PartialOrderRule(4, [(1, 0), (2, 0), (3, 1)])
    assert np.allclose(rule.distribution(counts_of([3, 4], 4)), [0, 0, 0.5, 0.5])
    # multiplicity weights the uniform choice among undominated parents
    assert np.allclose(rule.distribution(counts_of([3, 3, 4], 4)), [0, 0, 2 / 3, 1 / 3])


def test_partial_order_rejects_symmetric_relation():
    with pytest.raises(ValueError):
        PartialOrderRule(3, [(0, 1), (1, 0)])


def test_mutation_rule():
    kernel = np.array([[0.0, 1.0], [1.0, 0.0]])
    rule = TransitiveWithMutationRule(2, 0.1, kernel)
    assert not rule.mutation_free
    # winner is type 2; mutates to type 1 with probability 0.1
    assert np.allclose(rule.distribution(counts_of([1, 2], 2)), [0.1, 0.9])
    assert np.allclose(rule.distribution(counts_of([1], 2)), [0.9, 0.1])


def test_exchangeability_under_permutation():
    rng = RngStream(8).generator()
    for rule in ALL_RULES:
        sizes = (1, 2) if rule.kind in ("logistic", "bernstein") else (1, 2, 3, 5)
        for k in sizes:
            if rule.kind == "bernstein" and k == 2 and rule.degree != 2:
                continue
            sample = rng.integers(1, rule.K + 1, size=k)
            base = rule.distribution(counts_of(sample, rule.K))
            for _ in range(5):
                perm = rng.permutation(sample)
                assert np.allclose(rule.distribution(counts_of(perm, rule.K)), base)


def test_no_mutation_support_invariant():
    rng = RngStream(9).generator()
    for rule in ALL_RULES:
        assert rule.mutation_free
        k = 2 if rule.kind in ("logistic", "bernstein") else 4
        for _ in range(30):
            sample = rng.integers(1, rule.K + 1, size=k)
            counts = counts_of(sample, rule.K)
            dist = rule.distribution(counts)
            assert np.all(dist[counts == 0] == 0.0)
            assert dist.min() >= 0 and abs(dist.sum() - 1.0) < 1e-12


def test_distribution_batch_matches_single():
    rng = RngStream(10).generator()
    for rule in ALL_RULES:
        k = 2 if rule.kind in ("logistic", "bernstein") else 3
        batch = rng.multinomial(k, np.full(rule.K, 1.0 / rule.K), size=50)
        rows = rule.distribution_batch(batch)
        for row, counts in zip(rows, batch):
            assert np.allclose(row, rule.distribution(counts))


def test_offspring_type_prob_neutral_is_identity():
    q = OffspringLaw(0.3, {2: 0.5, 3: 0.5})
    x = np.array([0.2, 0.3, 0.5])
    res = offspring_type_prob(NeutralRule(3), q, x)
    assert res.exact
    assert np.allclose(res.probs, x, atol=1e-12)


def test_offspring_type_prob_transitive_pair():
    # p_1 = (1 - rho) x_1 + rho x_1^2 = 0.5 - 0.25 rho at x = (1/2, 1/2)
    for rho in (0.0, 0.2, 1.0):
        q = OffspringLaw(rho, {2: 1.0})
        res = offspring_type_prob(TransitiveRule(2), q, [0.5, 0.5])
        assert res.probs[0] == pytest.approx(0.5 - 0.25 * rho, abs=1e-12)


def test_offspring_type_prob_monomorphic():
    q = OffspringLaw(0.4, {3: 1.0})
    for rule in ALL_RULES:
        if rule.kind in ("logistic", "bernstein"):
            continue
        x = np.zeros(rule.K)
        x[1] = 1.0
        assert np.allclose(offspring_type_prob(rule, q, x).probs, x, atol=1e-12)


def test_offspring_type_prob_monte_carlo_branch():
    q = OffspringLaw(1.0, {40: 1.0})  # beyond the enumeration cutoff
    x = np.array([0.6, 0.4])
    res = offspring_type_prob(TransitiveRule(2), q, x, rng=RngStream(11).generator(), mc_samples=20_000)
    assert not res.exact
    exact_p1 = 0.6**40
    assert abs(res.probs[0] - exact_p1) <= 4.5 * max(res.stderr[0], 1e-6)


# ---------------------------------------------------------------------------
# Bernstein construction
# ---------------------------------------------------------------------------


def test_bernstein_identity_degree_one_behaves_neutrally_on_singletons():
    rule = bernstein_rule(PolynomialMap.identity(3))
    assert rule.degree == 1
    for i in range(3):
        single = np.zeros(3, dtype=int)
        single[i] = 1
        expected = np.zeros(3)
        expected[i] = 1.0
        assert np.allclose(rule.distribution(single), expected)


def test_bernstein_transitive_pair_table():
    n, table = bernstein_table(transitive_pair_map(2))
    assert n == 2
    # composition order over K=2, n=2 is (0,2), (1,1), (2,0)
    assert np.allclose(table, [[0, 1], [0, 1], [1, 0]])
    rule = bernstein_rule(transitive_pair_map(2))
    transitive = TransitiveRule(2)
    for counts in ([2, 0], [1, 1], [0, 2]):
        assert np.allclose(rule.distribution(np.array(counts)), transitive.distribution(np.array(counts)))


def test_bernstein_rejects_out_of_range_coefficient():
    bad = PolynomialMap([{(1, 0): 1.2, (0, 1): -0.2}, {(0, 1): 1.2, (1, 0): -0.2}])
    with pytest.raises(ValueError) as err:
        bernstein_rule(bad)
    assert "multi-index" in str(err.value)


def test_bernstein_round_trip_evaluation():
    rng = RngStream(12).generator()
    for g in (transitive_pair_map(3), cyclic_contest_map()):
        n, table = bernstein_table(g)
        pts = rng.dirichlet(np.ones(g.K), size=100)
        assert np.allclose(evaluate_bernstein(n, table, pts), g(pts), atol=1e-10)


def test_bernstein_degree_elevation_keeps_values():
    g = transitive_pair_map(2)
    n, table = bernstein_table(g, degree=4)
    pts = RngStream(13).generator().dirichlet(np.ones(2), size=50)
    assert np.allclose(evaluate_bernstein(n, table, pts), g(pts), atol=1e-10)


def test_bernstein_rule_type_law_matches_map():
    g = cyclic_contest_map()
    rule = bernstein_rule(g)
    pts = RngStream(14).generator().dirichlet(np.ones(3), size=20)
    for x in pts:
        assert np.allclose(rule.type_law(rule.degree, x), g(x), atol=1e-12)


def test_bernstein_paired_offspring_law():
    rule = bernstein_rule(cyclic_contest_map())
    q = rule.offspring_law(0.25)
    assert q.pmf(1) == pytest.approx(0.75)
    assert q.pmf(2) == pytest.approx(0.25)


def test_bernstein_row_sum_validation():
    with pytest.raises(ValueError) as err:
        BernsteinRule(1, np.array([[0.7, 0.2], [0.5, 0.5]]))
    assert "sums to" in str(err.value)


def test_rejects_empty_sample():
    with pytest.raises(ValueError):
        TransitiveRule(2).distribution(np.array([0, 0]))
