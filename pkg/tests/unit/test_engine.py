"""
Tests for the experiment engine: iterate floors, block summation, averages,
occupancy tables and the invariance diagnostics.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergodic_lab.constants import resolve
from ergodic_lab.engine import (
    BLOCK,
    BlockSummer,
    ExperimentSpec,
    IterateSequence,
    default_schedule,
    discrepancy,
    draw_start_points,
    floor_iterates,
    hits_linear_floor,
    invariance_defect,
    invariance_shift,
    level_profile,
    multiple_average,
    occupancy,
    suspension_orbit,
    term_decomposition,
    trace,
)
from ergodic_lab.errors import ConfigError, GrowthOrderError
from ergodic_lab.expr import FunctionSpec
from ergodic_lab.systems import (
    CircleRotation,
    FiniteCycle,
    Indicator,
    Suspension,
    Tabulated,
    TrigPoly,
)

pytestmark = pytest.mark.unit


def sublinear(text: str, budget: int = 100_000) -> IterateSequence:
    return IterateSequence.sublinear(FunctionSpec.from_text(text), budget)


# ============================================================================
# Iterates
# ============================================================================

def test_sqrt_floors():
    floors = sublinear("x^0.5").floors(10_000)
    expected = [math.isqrt(n) for n in range(10_000)]
    np.testing.assert_array_equal(floors, expected)


def test_floor_iterates_returns_a_copy():
    iterate = sublinear("x^0.5")
    floors = floor_iterates(iterate, 100)
    floors[:] = -1
    assert floor_iterates(iterate, 100)[99] == 9


def test_irrational_linear_floors_are_exact():
    # floor(n*sqrt2) = isqrt(2 n^2) since n*sqrt2 is never an integer
    iterate = IterateSequence.linear(resolve("sqrt2"), 0.0, budget=200_000)
    expected = [math.isqrt(2 * k * k) for k in range(200_000)]
    np.testing.assert_array_equal(iterate.floors(200_000), expected)


def test_rational_linear_floors():
    iterate = IterateSequence.linear_rational(3, 2, budget=10)
    np.testing.assert_array_equal(iterate.floors(10), [0, 1, 3, 4, 6, 7, 9, 10, 12, 13])


def test_rational_slope_is_reduced():
    iterate = IterateSequence.linear_rational(6, 4)
    assert iterate.source.rational == (3, 2)


def test_floors_cache_grows_consistently():
    iterate = sublinear("x^0.7")
    short = iterate.floors(5_000).copy()
    long = iterate.floors(50_000)
    np.testing.assert_array_equal(long[:5_000], short)


def test_floors_past_budget():
    with pytest.raises(ConfigError, match="budget"):
        sublinear("x^0.5", budget=100).floors(101)


def test_linear_slope_must_be_nonzero():
    with pytest.raises(ConfigError):
        IterateSequence.linear_rational(0, 3)


# ============================================================================
# Block summation
# ============================================================================

def test_block_summer_matches_fsum():
    rng = np.random.default_rng(3)
    values = rng.standard_normal(3 * BLOCK + 17) + 1j * rng.standard_normal(3 * BLOCK + 17)
    summer = BlockSummer(lambda lo, hi: values[lo:hi])
    total = summer.total(len(values))
    assert total.real == pytest.approx(math.fsum(values.real), abs=1e-11)
    assert total.imag == pytest.approx(math.fsum(values.imag), abs=1e-11)


def test_block_summer_partial_totals_are_prefix_sums():
    values = np.arange(10 * BLOCK, dtype=float).astype(complex)
    summer = BlockSummer(lambda lo, hi: values[lo:hi])
    for N in (1, BLOCK - 1, BLOCK, 2 * BLOCK + 5, 10 * BLOCK):
        assert summer.total(N) == N * (N - 1) / 2


@pytest.mark.parametrize("workers", [2, 8])
def test_block_summer_is_independent_of_workers(workers):
    rng = np.random.default_rng(11)
    values = rng.standard_normal(20 * BLOCK + 3).astype(complex)
    serial = BlockSummer(lambda lo, hi: values[lo:hi]).total(len(values))
    parallel = BlockSummer(lambda lo, hi: values[lo:hi], workers).total(len(values))
    assert serial == parallel


def test_mean_needs_positive_n():
    with pytest.raises(ConfigError):
        BlockSummer(lambda lo, hi: np.ones(hi - lo)).mean(0)


# ============================================================================
# Averages
# ============================================================================

def test_constant_observable_has_mass_one():
    spec = ExperimentSpec(
        systems=[CircleRotation.from_angle("sqrt2")],
        observables=[TrigPoly.constant(1.0)],
        iterates=[sublinear("x^0.8")],
        starts=[0.4],
    )
    assert multiple_average(spec, 30_000) == 1.0


@settings(max_examples=15, deadline=None)
@given(
    c=st.floats(min_value=0.3, max_value=0.95),
    x=st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
)
def test_average_is_bounded(c, x):
    spec = ExperimentSpec(
        systems=[CircleRotation.from_angle("sqrt2")],
        observables=[TrigPoly.from_dict({1: 0.5, -3: 0.5j})],
        iterates=[sublinear(f"x^{c!r}", budget=20_000)],
        starts=[x],
    )
    result = trace(spec, [1_000, 20_000])
    assert result.within_bound()
    assert result.bound == 1.0


def test_trace_reproducible_across_workers(rotation_experiment):
    schedule = [5_000, 40_000, 50_000]
    values = [trace(rotation_experiment(), schedule, workers).values for workers in (1, 2, 8)]
    assert values[0] == values[1] == values[2]


def test_cycle_average_along_linear_iterate():
    spec = ExperimentSpec(
        systems=[FiniteCycle(4)],
        observables=[Tabulated((1.0, 0.0, 0.0, 0.0))],
        iterates=[IterateSequence.linear_rational(1, 1, budget=4_000)],
        starts=[0],
    )
    assert multiple_average(spec, 4_000) == pytest.approx(0.25)


def test_mismatched_experiment_lengths():
    with pytest.raises(ConfigError):
        ExperimentSpec(
            systems=[CircleRotation.from_angle("sqrt2")],
            observables=[],
            iterates=[sublinear("x^0.5")],
            starts=[0.0],
        )


def test_growth_order_must_decrease():
    spec = ExperimentSpec(
        systems=[CircleRotation.from_angle("sqrt2")] * 2,
        observables=[TrigPoly.mode(1)] * 2,
        iterates=[sublinear("x^0.5"), sublinear("x^0.9")],
        starts=[0.0, 0.0],
    )
    with pytest.raises(GrowthOrderError):
        spec.validate_growth_order()


def test_default_schedule_doubles():
    assert default_schedule(10_000, first=1_000) == [1_000, 2_000, 4_000, 8_000]


# ============================================================================
# Occupancy
# ============================================================================

@pytest.mark.parametrize("N", [1, 999, 10_000, 54_321])
def test_occupancy_partitions_times(N):
    table = occupancy([sublinear("x^0.7"), sublinear("x^0.4")], N)
    assert table.total == N
    assert len({tuple(b) for b in table.boxes}) == len(table.boxes)
    assert np.all(table.counts > 0)


def test_predicted_count_for_sqrt():
    iterate = sublinear("x^0.5")
    table = occupancy([iterate], 40_000)
    marginal = table.marginal(0)
    for b in (1, 2, 3, 10, 57, 150, 198):
        assert table.predicted_count(0, b) == 2 * b + 1 == marginal[b]


def test_term_decomposition_single_iterate():
    N = 10_000
    terms = term_decomposition([sublinear("x^0.5")], N)
    # one chain of levels 0..99: |U(b) - U(b-1)| = 2 for b >= 1
    assert terms.shared == pytest.approx(2 * 99 / N)
    assert terms.appears == pytest.approx(1 / N)
    assert terms.disappears == pytest.approx(199 / N)


def test_level_profile_counts():
    profile = level_profile(sublinear("x^0.5"), 10_000)
    np.testing.assert_array_equal(profile.counts[:5], [1, 3, 5, 7, 9])
    assert profile.cumulative[-1] == 10_000
    assert profile.almost_increasing == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(
    ell=st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
    start=st.integers(min_value=0, max_value=5_000),
)
def test_hit_set_is_exact(ell, start):
    gamma = resolve("sqrt2")
    iterate = IterateSequence.linear(gamma, resolve(repr(ell)), budget=8_000)
    hit = set(int(v) for v in iterate.floors(8_000))
    for m in range(start + 2, start + 400):
        assert (m in hit) == hits_linear_floor(gamma, resolve(repr(ell)), m)


def test_hit_set_slow_slope_hits_everything():
    assert hits_linear_floor(0.5, 0.0, 17)


# ============================================================================
# Diagnostics
# ============================================================================

def test_discrepancy_of_equispaced_points():
    N = 1_000
    assert discrepancy(np.arange(N) / N) == pytest.approx(1.0 / N)


def test_discrepancy_of_golden_sequence():
    N = 10_000
    golden = (1 + math.sqrt(5)) / 2
    points = (np.arange(1, N + 1) * golden) % 1.0
    assert discrepancy(points) <= 3 * math.log(N) / N


def test_invariance_defect_vanishes_for_constants(rotation_experiment):
    spec = rotation_experiment()
    assert invariance_defect(spec, 20_000, TrigPoly.constant(2.0)) == 0.0


def test_invariance_defect_of_a_character(rotation_experiment):
    # e_1 - e_1∘T = (1 - e(θ)) e_1, so the defect is a multiple of |A_N|
    spec = rotation_experiment()
    theta = spec.systems[0].theta
    defect = invariance_defect(spec, 20_000, TrigPoly.mode(1), r=1)
    expected = abs(1 - np.exp(2j * np.pi * theta)) * abs(multiple_average(spec, 20_000))
    assert defect == pytest.approx(expected, abs=1e-12)


def test_invariance_defect_of_an_arc_moves_the_arc(rotation_experiment):
    spec = rotation_experiment()
    rotation, N = spec.systems[0], 20_000
    arc = Indicator.interval(0.1, 0.4)
    xs = rotation.apply_power(spec.iterates[0].floors(N), spec.starts[0])
    brute = abs(np.mean(arc.evaluate(xs) - arc.evaluate(rotation.apply_power(2, xs))))
    assert invariance_defect(spec, N, arc, r=2) == pytest.approx(brute, abs=2 / N)


def test_invariance_shift_uses_rational_numerator():
    spec = ExperimentSpec(
        systems=[CircleRotation.from_rational(1, 3)],
        observables=[TrigPoly.mode(1)],
        iterates=[IterateSequence.linear_rational(3, 2)],
        starts=[0.0],
    )
    assert invariance_shift(spec) == 3


def test_suspension_orbit_matches_powers():
    base = CircleRotation.from_angle("sqrt3")
    gamma = resolve("sqrt2")
    ts, xs = suspension_orbit(base, gamma, (0.3, 0.1), 200)
    t, x = Suspension(base, gamma).apply_power(199, (0.3, 0.1))
    assert ts[199] == pytest.approx(t, abs=1e-10)
    gap = abs(xs[199] - x) % 1.0
    assert min(gap, 1.0 - gap) <= 1e-10


def test_seeded_start_points_are_reproducible():
    systems = [CircleRotation.from_angle("sqrt2"), CircleRotation.from_angle("sqrt3")]
    first = draw_start_points(systems, "product", 42)
    assert first == draw_start_points(systems, "product", 42)
    assert first != draw_start_points(systems, "product", 43)
    diagonal = draw_start_points(systems, "diagonal", 42)
    assert diagonal[0] == diagonal[1]
