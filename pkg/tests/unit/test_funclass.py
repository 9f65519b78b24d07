"""
Tests for the function-class checks on the log-geometric grid.

The full catalog placement table lives in the acceptance suite; these cover
the verdict rules on functions whose behaviour on the grid is unambiguous.
"""

import numpy as np
import pytest

from ergodic_lab.errors import ConfigError
from ergodic_lab.expr import FunctionSpec
from ergodic_lab.funclass import (
    CATALOG,
    CLASS_NAMES,
    Verdict,
    catalog_function,
    check_dominated,
    check_Dk,
    check_fejer,
    check_Mk,
    check_R,
    check_S,
    check_sublinear,
    check_T,
    classify,
    compose_inverse,
    d0_limit_report,
    default_grid,
    derivative_ratio_bound,
    derivative_ratio_report,
    estimate_limit,
    ratio_profile,
    translate_ratio_bound,
)

pytestmark = pytest.mark.unit


def fn(text: str) -> FunctionSpec:
    return FunctionSpec.from_text(text)


# ============================================================================
# Grid and limit detection
# ============================================================================

def test_default_grid_spans_ten_to_1e12():
    grid = default_grid()
    assert grid[0] == pytest.approx(10.0)
    assert grid[-1] == pytest.approx(1e12)
    np.testing.assert_allclose(grid[1:] / grid[:-1], 10.0 ** 0.25)


def test_limit_detected_through_log_correction():
    grid = default_grid()
    values = 1.0 / 3.0 + 1.0 / np.log(grid)
    limit = estimate_limit(grid, values)
    assert limit.exists
    assert limit.value == pytest.approx(1.0 / 3.0, abs=1e-6)
    assert not limit.oscillates


def test_oscillating_ratio_has_no_limit():
    grid = default_grid()
    values = 0.5 + 0.2 * np.sin(np.log(grid))
    limit = estimate_limit(grid, values)
    assert not limit.exists
    assert limit.oscillates


def test_too_short_sequence_is_not_a_limit():
    grid = default_grid()[:5]
    assert not estimate_limit(grid, np.ones(5)).exists


# ============================================================================
# Class checks
# ============================================================================

@pytest.mark.parametrize("text,expected", [
    ("x^0.5", Verdict.HOLDS),
    ("x^0.9", Verdict.HOLDS),
    ("log(x)^2", Verdict.HOLDS),
    ("3*x+1", Verdict.FAILS),
])
def test_sublinear(text, expected):
    assert check_sublinear(fn(text)).verdict is expected


def test_sqrt_is_tempered_with_limit_one_half():
    verdict = check_T(fn("x^0.5"))
    assert verdict.holds
    assert verdict.estimated_limit == pytest.approx(0.5, abs=1e-6)


def test_log_squared_is_fejer_but_not_tempered():
    f = fn("log(x)^2")
    assert check_fejer(f).holds
    verdict = check_T(f)
    assert verdict.fails
    assert "-> 0" in verdict.reason


def test_dominated_orders_powers():
    assert check_dominated(fn("x^0.5"), fn("x^0.9")).holds
    assert not check_dominated(fn("x^0.9"), fn("x^0.5")).holds


def test_classify_keeps_requested_order():
    verdicts = classify(fn("x^0.5"), ["T", "SL"])
    assert [v.class_name for v in verdicts] == ["T", "SL"]
    assert all(v.holds for v in verdicts)


def test_inverse_classes_apply_to_inverse():
    (d0,) = classify(fn("x^0.5"), ["D0"])
    assert d0.holds
    assert "evaluated toward +inf" in d0.reason


def test_verdict_serializes_with_conjuncts():
    data = check_fejer(fn("log(x)^2")).to_dict()
    assert data["verdict"] == "holds"
    assert [c["verdict"] for c in data["conjuncts"]] == ["holds", "holds"]


def test_all_class_names_have_checks():
    verdicts = classify(fn("x^0.5"))
    assert [v.class_name for v in verdicts] == list(CLASS_NAMES)


def test_ratio_profile_of_a_power():
    profile = ratio_profile(fn("x^0.5"))
    assert not profile.flagged.any()
    assert np.allclose(profile.ratio(1), 0.5)
    assert np.allclose(profile.ratio(2), -0.5)
    assert np.allclose(profile.ratio(3), -1.5)


def test_power_is_in_R_with_all_three_ratio_limits():
    verdict = check_R(fn("x^0.5"))
    assert verdict.holds
    limits = [c.estimated_limit for c in verdict.conjuncts]
    assert limits == pytest.approx([0.5, -0.5, -1.5], abs=1e-6)


def test_oscillating_ratio_is_not_in_R():
    # x a'/a = 0.5 + cos u / (2 + sin u) with u = log x
    verdict = check_R(fn("x^0.5*(2+sin(log(x)))"))
    assert verdict.fails
    assert verdict.conjuncts[0].fails


class TestTranslationAndMonotonicity:
    """D_k and M_k evaluated directly, mostly on x^2 (the inverse of sqrt)"""

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_square_satisfies_Dk(self, k):
        verdict = check_Dk(fn("x^2"), k)
        assert verdict.holds, verdict.reason
        assert verdict.class_name == f"D{k}"

    @pytest.mark.parametrize("k", [0, 1])
    def test_square_satisfies_Mk(self, k):
        assert check_Mk(fn("x^2"), k).holds

    def test_sign_change_is_witnessed(self):
        verdict = check_Mk(fn("sin(log(x))"), 0)
        assert verdict.fails
        (x0, v0), (x1, v1) = verdict.witness
        assert x0 < x1
        assert v0 * v1 < 0

    @pytest.mark.parametrize("check", [check_Dk, check_Mk])
    def test_order_out_of_range(self, check):
        with pytest.raises(ValueError):
            check(fn("x^2"), 3)


def test_sqrt_is_in_S():
    verdict = check_S(fn("x^0.5"))
    assert verdict.holds, verdict.reason
    assert [c.class_name for c in verdict.conjuncts] == [
        "SL(a)", "SL(1/a')", "M1(inv)", "D0(inv)", "D1(inv)", "D2|M2"
    ]


def test_linear_function_is_not_in_S():
    verdict = check_S(fn("3*x+1"))
    assert verdict.fails
    assert "SL(a)" in verdict.reason


# ============================================================================
# Inverses and bound reports
# ============================================================================

def test_compose_inverse_of_sqrt_is_square():
    inverse = compose_inverse(fn("x^0.5"))
    assert inverse.value(30.0) == pytest.approx(900.0, rel=1e-8)
    assert inverse.derivative(1, 30.0) == pytest.approx(60.0, rel=1e-6)
    assert inverse.derivative(2, 30.0) == pytest.approx(2.0, rel=1e-5)


def test_d0_limit_never_nonzero_for_sqrt():
    report = d0_limit_report(fn("x^0.5"))
    assert report.verdict is not Verdict.FAILS
    assert report.name == "D0-limit"


def test_translate_ratio_is_bounded_for_sqrt():
    report = translate_ratio_bound(fn("x^0.5"))
    assert report.verdict is Verdict.HOLDS
    assert report.constant >= 1.0
    assert report.to_dict()["name"] == "translate-ratio"


@pytest.mark.parametrize("text,c", [("x^0.5", 0.5), ("x^0.3", 0.3)])
def test_derivative_ratio_of_a_power_is_its_exponent(text, c):
    report = derivative_ratio_bound(fn(text), c, c)
    assert report.verdict is Verdict.HOLDS
    assert report.constant == pytest.approx(c, abs=1e-6)


def test_derivative_ratio_of_the_modulated_power():
    # x a'/a = 0.04 + 3 cos u / (100 + sin u) with u = log x
    report = derivative_ratio_bound(catalog_function("sin_modulated"), 0.04 - 3 / 99, 0.04 + 3 / 99)
    assert report.verdict is Verdict.HOLDS
    assert 0.0 < report.constant < 0.1


def test_derivative_ratio_outside_the_exponent_range():
    report = derivative_ratio_bound(fn("x^0.5"), 0.3, 0.3)
    assert report.verdict is Verdict.FAILS
    assert report.constant is None


def test_derivative_ratio_report_reads_the_range_from_the_tail():
    report = derivative_ratio_report(fn("x^0.5"))
    assert report.verdict is Verdict.HOLDS
    assert report.constant == pytest.approx(0.5, abs=1e-6)


# ============================================================================
# Catalog
# ============================================================================

def test_catalog_functions_parse():
    for name in CATALOG:
        spec = catalog_function(name)
        assert spec.name == name
        assert np.isfinite(spec.value(spec.domain_start + 100.0))


def test_unknown_catalog_name():
    with pytest.raises(ConfigError, match="unknown catalog function"):
        catalog_function("x_squared")


def test_modulated_power_turns_convex_once_per_period_of_log_x():
    # a'' > 0 only while log x mod 2*pi sits near 4, e.g. x ~ 10^9.9
    verdict = check_Mk(catalog_function("sin_modulated"), 1)
    assert verdict.fails
    ((x0, v0), (x1, v1)) = verdict.witness
    x_convex = x0 if v0 > 0 else x1
    assert 3.3 < np.log(x_convex) % (2 * np.pi) < 4.6
