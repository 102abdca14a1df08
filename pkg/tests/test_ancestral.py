import math

import numpy as np
import pytest

from lwf.ancestral import (
    AncestralModel,
    ancestral_rates,
    dual_moment,
    dual_moment_exact,
    fixation_probabilities,
    simulate_ancestral,
    stationary_and_pgf,
    stationary_exact,
)
from lwf.errors import RateExplosionError, TransienceError
from lwf.measures import PointMass, ZeroMeasure, lambda_nk
from lwf.rng import RngStream


def test_rates_branching_only_from_single_lineage():
    model = AncestralModel(kappa=0.7, sigma=1.0, increments={2: 1.0}, measure=PointMass(0.5, 1.0))
    # from n = 1 there is nothing to merge: only branching by the increment
    assert ancestral_rates(model, 1) == [(3, pytest.approx(0.7))]


def test_rates_single_kingman_pair():
    model = AncestralModel(kappa=0.0, sigma=1.0, increments={1: 1.0}, measure=ZeroMeasure())
    assert ancestral_rates(model, 2) == [(1, pytest.approx(1.0))]


def test_rates_total_merger_atom_at_one():
    model = AncestralModel(kappa=0.0, sigma=0.0, increments={1: 1.0}, measure=PointMass(1.0, 1.0))
    assert ancestral_rates(model, 3) == [(1, pytest.approx(1.0))]


def test_rates_match_collision_integrals():
    measure = PointMass(0.5, 1.0)
    model = AncestralModel(kappa=0.5, sigma=2.0, increments={1: 0.25, 3: 0.75}, measure=measure)
    n = 6
    rates = dict(ancestral_rates(model, n))
    assert rates[n + 1] == pytest.approx(n * 0.5 * 0.25)
    assert rates[n + 3] == pytest.approx(n * 0.5 * 0.75)
    for k in range(2, n + 1):
        expected = math.comb(n, k) * lambda_nk(measure, n, k)
        if k == 2:
            expected += 2.0 * n * (n - 1) / 2.0
        assert rates[n - k + 1] == pytest.approx(expected)


def test_branching_rate_scales_with_lineage_count():
    model = AncestralModel(kappa=1.0, sigma=0.0, increments={1: 1.0}, measure=ZeroMeasure())
    assert dict(ancestral_rates(model, 5))[6] == pytest.approx(5.0)
    literal = AncestralModel(
        kappa=1.0, sigma=0.0, increments={1: 1.0}, measure=ZeroMeasure(), per_lineage_branching=False
    )
    assert dict(ancestral_rates(literal, 5))[6] == pytest.approx(1.0)


def test_pure_death_paths_are_nonincreasing():
    model = AncestralModel(kappa=0.0, sigma=1.0, increments={1: 1.0}, measure=PointMass(0.4, 1.0))
    for r in range(50):
        _, states = simulate_ancestral(model, 12, 1e9, RngStream(1).derive(r).generator())
        assert np.all(np.diff(states) < 0)
        assert states[-1] == 1


def test_kingman_absorption_time():
    # sum of Exp(C(j,2)) waits: mean 2 (1 - 1/n0)
    model = AncestralModel(kappa=0.0, sigma=1.0, increments={1: 1.0}, measure=ZeroMeasure())
    rng = RngStream(2).generator()
    n0, R = 10, 10_000
    totals = np.empty(R)
    for r in range(R):
        times, states = simulate_ancestral(model, n0, 1e9, rng)
        assert states[-1] == 1
        totals[r] = times[-1]
    expected = 2.0 * (1.0 - 1.0 / n0)
    se = totals.std() / math.sqrt(R)
    assert abs(totals.mean() - expected) <= 4.0 * se


def test_rate_explosion_guard():
    model = AncestralModel(kappa=50.0, sigma=0.0, increments={1: 1.0}, measure=PointMass(0.5, 1.0))
    with pytest.raises(RateExplosionError):
        simulate_ancestral(model, 1, 1e9, RngStream(3).generator(), state_guard=500)


def test_transience_detector_aborts_stationary_run():
    # kappa far above the threshold 4 log 2: the count grows without bound
    model = AncestralModel(kappa=50.0, sigma=0.0, increments={1: 1.0}, measure=PointMass(0.5, 1.0), n_cap=300)
    with pytest.raises(TransienceError):
        stationary_and_pgf(model, 1, 5000.0, None, RngStream(4).generator())


def test_stationary_pure_death_concentrates_at_one():
    model = AncestralModel(kappa=0.0, sigma=1.0, increments={1: 1.0}, measure=ZeroMeasure())
    est = stationary_and_pgf(model, 8, 2000.0, None, RngStream(5).generator())
    mass_at_1 = est.occupation[est.states.tolist().index(1)]
    assert mass_at_1 > 0.99
    val, _ = est.pgf(0.37)
    assert val == pytest.approx(0.37, abs=0.01)
    assert est.pgf(1.0)[0] == pytest.approx(1.0, abs=1e-12)


def test_stationary_matches_truncated_linear_solve():
    model = AncestralModel(kappa=0.05, sigma=1.0, increments={2: 1.0}, measure=ZeroMeasure())
    nu = stationary_exact(model, 60)
    est = stationary_and_pgf(model, 1, 30_000.0, None, RngStream(6).generator())
    for idx, state in enumerate(est.states):
        if est.occupation[idx] > 5e-4:
            tol = 4.0 * est.stderr[idx] + 1e-3
            assert abs(est.occupation[idx] - nu[state - 1]) <= tol


def test_dual_moment_matches_matrix_exponential():
    model = AncestralModel(kappa=0.5, sigma=1.0, increments={1: 1.0}, measure=ZeroMeasure())
    exact = dual_moment_exact(model, 0.3, 2, 1.0, n_max=200)
    mc, se = dual_moment(model, 0.3, 2, 1.0, 40_000, RngStream(7).generator())
    assert abs(mc - exact) <= 4.0 * se

    jumps = AncestralModel(kappa=0.5, sigma=0.5, increments={1: 1.0}, measure=PointMass(0.5, 1.0))
    exact = dual_moment_exact(jumps, 0.7, 3, 0.8, n_max=200)
    mc, se = dual_moment(jumps, 0.7, 3, 0.8, 40_000, RngStream(8).generator())
    assert abs(mc - exact) <= 4.0 * se


def test_fixation_probabilities_neutral_is_initial_state():
    model = AncestralModel(kappa=0.0, sigma=1.0, increments={1: 1.0}, measure=ZeroMeasure())
    pred = fixation_probabilities(model, [0.2, 0.3, 0.5])
    assert pred.regime == "recurrent"
    assert np.allclose(pred.probs, [0.2, 0.3, 0.5])
    assert np.all(pred.stderr == 0.0)


def test_fixation_probabilities_transient_picks_top_present_label():
    model = AncestralModel(kappa=10.0, sigma=0.0, increments={1: 1.0}, measure=PointMass(0.5, 1.0))
    assert model.kappa_star == pytest.approx(4.0 * math.log(2.0))
    assert not model.is_positive_recurrent()
    pred = fixation_probabilities(model, [0.9, 0.1, 0.0])
    assert pred.regime == "transient"
    assert np.array_equal(pred.probs, [0.0, 1.0, 0.0])


def test_fixation_probabilities_recurrent_sums_to_one():
    model = AncestralModel(kappa=1.0, sigma=0.0, increments={1: 1.0}, measure=PointMass(0.5, 1.0))
    assert model.is_positive_recurrent()
    pred = fixation_probabilities(model, [0.2, 0.3, 0.5], rng=RngStream(9).generator(), total_time=2e4)
    assert pred.regime == "recurrent"
    assert pred.probs.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(pred.probs >= 0.0)
    # ordered contests penalize low labels
    assert pred.probs[0] < 0.2 and pred.probs[2] > 0.5


def test_fixation_probabilities_requires_transitive():
    model = AncestralModel(kappa=1.0, sigma=1.0, increments={1: 1.0}, measure=ZeroMeasure())
    with pytest.raises(ValueError):
        fixation_probabilities(model, [0.5, 0.5], drift_kind="rps")


def test_sigma_keeps_the_chain_recurrent_even_with_zero_threshold():
    # no collisions at all: kappa_star = 0, but pair coalescence dominates
    model = AncestralModel(kappa=1.0, sigma=1.0, increments={1: 1.0}, measure=ZeroMeasure())
    assert model.kappa_star == 0.0
    assert model.is_positive_recurrent()


def test_model_validation():
    with pytest.raises(ValueError):
        AncestralModel(kappa=1.0, sigma=0.0, increments={0: 1.0}, measure=ZeroMeasure())
    with pytest.raises(ValueError):
        AncestralModel(kappa=1.0, sigma=0.0, increments={1: 0.5}, measure=ZeroMeasure())
    with pytest.raises(ValueError):
        AncestralModel(kappa=-1.0, sigma=0.0, increments={1: 1.0}, measure=ZeroMeasure())
