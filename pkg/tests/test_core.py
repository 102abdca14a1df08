import numpy as np
import pytest

from lwf.core import (
    OffspringLaw,
    SimplexPoint,
    as_frequencies,
    make_schedule,
    random_interior_points,
    round_to_counts,
)
from lwf.errors import ScheduleError
from lwf.measures import PointMass, ZeroMeasure
from lwf.rng import RngStream


def test_simplex_point_invariants():
    p = SimplexPoint(np.array([0.2, 0.3, 0.5]))
    assert p.K == 3
    with pytest.raises(ValueError):
        SimplexPoint(np.array([0.2, 0.3, 0.4]))  # sums to 0.9
    with pytest.raises(ValueError):
        SimplexPoint(np.array([-0.1, 0.6, 0.5]))
    with pytest.raises(ValueError):
        SimplexPoint(np.array([1.0]))  # K >= 2
    with pytest.raises(ValueError):
        as_frequencies([0.5, np.nan])


def test_simplex_point_is_immutable():
    p = SimplexPoint(np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        p.freqs[0] = 0.9


def test_vertex_and_uniform():
    assert np.array_equal(SimplexPoint.vertex(3, 1).freqs, [0.0, 1.0, 0.0])
    assert np.allclose(SimplexPoint.uniform(4).freqs, 0.25)


def test_round_to_counts_largest_remainder():
    counts = round_to_counts([0.2, 0.3, 0.5], 10)
    assert counts.tolist() == [2, 3, 5]
    # remainders: 0.33, 0.33, 0.34 over N=3 -> the extra slot goes to x_3
    counts = round_to_counts([1 / 3, 1 / 3, 1 / 3], 4)
    assert counts.sum() == 4 and counts.max() == 2
    counts = round_to_counts([0.105, 0.895], 10)
    assert counts.tolist() == [1, 9]


def test_random_interior_points_stay_interior():
    pts = random_interior_points(RngStream(1).generator(), 4, 200, 0.05)
    assert pts.shape == (200, 4)
    assert pts.min() >= 0.05
    assert np.allclose(pts.sum(axis=1), 1.0)


def test_offspring_law_basic():
    q = OffspringLaw(0.1, {2: 0.5, 4: 0.5})
    assert q.pmf(1) == pytest.approx(0.9)
    assert q.pmf(2) == pytest.approx(0.05)
    assert q.beta == pytest.approx(0.5 * 1 + 0.5 * 3)
    assert q.increments() == {1: 0.5, 3: 0.5}
    assert q.max_k == 4
    with pytest.raises(ValueError):
        OffspringLaw(1.5, {2: 1.0})
    with pytest.raises(ValueError):
        OffspringLaw(0.5, {1: 1.0})
    with pytest.raises(ValueError):
        OffspringLaw(0.5, {2: 0.7})


def test_make_schedule_no_events():
    s = make_schedule(10**4, 0.25, 1.0, 1.0, ZeroMeasure(), {2: 1.0})
    assert s.rho == pytest.approx(1e-4)
    assert s.gamma == 0.0
    assert s.size_law is None


def test_make_schedule_point_mass_example():
    s = make_schedule(10**4, 0.25, 1.0, 1.0, PointMass(0.5, 1.0), {2: 1.0})
    assert s.rho == pytest.approx(1e-4)
    assert s.truncation == pytest.approx(0.1)
    assert s.event_mass == pytest.approx(4.0)  # 1 / 0.5**2, atom above the cutoff
    assert s.gamma == pytest.approx(4e-4)
    assert not s.clamped


def test_make_schedule_pure_jump_exponent_rule():
    s = make_schedule(100, 0.25, 1.0, 0.0, ZeroMeasure(), {2: 1.0}, b=0.75)
    assert s.rho == pytest.approx(100 ** -0.75)
    # admissibility along a growing grid: N*rho -> infinity, rho*N^(2 alpha) -> 0
    grid = [10**2, 10**3, 10**4, 10**5]
    n_rho = [N * make_schedule(N, 0.25, 1.0, 0.0, ZeroMeasure(), {2: 1.0}, b=0.75).rho for N in grid]
    shrink = [make_schedule(N, 0.25, 1.0, 0.0, ZeroMeasure(), {2: 1.0}, b=0.75).rho * N**0.5 for N in grid]
    assert all(a < b for a, b in zip(n_rho, n_rho[1:]))
    assert all(a > b for a, b in zip(shrink, shrink[1:]))
    # default exponent sits in the middle of the admissible band
    assert make_schedule(100, 0.25, 1.0, 0.0, ZeroMeasure(), {2: 1.0}).b == pytest.approx(0.75)


def test_make_schedule_rejects_infeasible():
    with pytest.raises(ScheduleError):
        make_schedule(1, 0.25, 1.0, 1.0, ZeroMeasure(), {2: 1.0})
    with pytest.raises(ScheduleError):
        make_schedule(100, 0.7, 1.0, 1.0, ZeroMeasure(), {2: 1.0})
    with pytest.raises(ScheduleError):
        make_schedule(100, 0.25, 1.0, 0.0, ZeroMeasure(), {2: 1.0}, b=0.4)
    # sigma > 0 pins rho, so an oversized event mass cannot be repaired
    with pytest.raises(ScheduleError):
        make_schedule(10, 0.49, 0.001, 1.0, PointMass(0.9, 100.0), {2: 1.0})


def test_make_schedule_clamps_when_smaller_rho_exists():
    # sigma = 0 with an aggressive exponent: a larger admissible b would fix
    # the overshoot, so the schedule clamps and flags instead of failing.
    with pytest.warns(UserWarning):
        s = make_schedule(1000, 0.05, 0.1, 0.0, PointMass(0.9, 2.0), {2: 1.0}, b=0.2)
    assert s.clamped and s.gamma == 1.0
