"""
Numeric membership checks for the growth classes of iterate functions.

Every check evaluates the function on a geometric grid ``x_k = 10 * 10**(k/4)`` up to
1e12 and applies an explicit decision rule to the tail of that grid. A check reports
``holds`` or ``fails`` only when its rule fires; anything else is ``inconclusive``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, InverseError, LabError, NonMonotoneError
from .expr import ArrayLike, FunctionSpec, RealFunction, inverse_eval

logger = logging.getLogger(__name__)

GRID_START = 10.0
GRID_RATIO = 10.0 ** 0.25
GRID_STOP = 1e12

TAIL = 16
HALF_TAIL = 8
LIMIT_WINDOW = 6
LIMIT_TOLERANCE = 1e-3
MIN_TAIL = 6

SUBLINEAR_FINAL = 1e-3
BOUNDED_BELOW = 1e-2
INTERIOR_MARGIN = 1e-2
DIVERGENCE_RETENTION = 0.95
CEILING_SLACK = 1e-3
VANISHING = 1e-9
H_POINTS = 21

CATALOG: Dict[str, str] = {
    "sqrt": "x^(1/2)",
    "cbrt": "x^(1/3)",
    "cbrt_log": "x^(1/3)*log(x)",
    "pow09": "x^0.9",
    "log_squared": "log(x)^2",
    "log_loglog": "log(x)*log(log(x))",
    "sin_modulated": "x^0.04*(4/0.04+sin(log(x)))^3",
    "affine_3x1": "3*x+1",
    "x_over_log": "x/log(x)",
}

CLASS_NAMES = ("SL", "F", "R", "T", "S", "D0", "D1", "D2", "M0", "M1", "M2")


class Verdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass
class ClassVerdict:
    class_name: str
    verdict: Verdict
    reason: str = ""
    witness: List[Tuple[float, float]] = field(default_factory=list)
    estimated_limit: Optional[float] = None
    conjuncts: List["ClassVerdict"] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    @property
    def fails(self) -> bool:
        return self.verdict is Verdict.FAILS

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["verdict"] = self.verdict.value
        data["conjuncts"] = [c.to_dict() for c in self.conjuncts]
        return data


@dataclass
class RatioProfile:
    """x·a′/a, x·a″/a′ and x·a‴/a″ over the grid; NaN marks a non-finite entry."""

    grid: np.ndarray
    ratios: np.ndarray
    flagged: np.ndarray

    def ratio(self, order: int) -> np.ndarray:
        return self.ratios[order - 1]


@dataclass
class LimitEstimate:
    value: Optional[float]
    oscillates: bool
    accelerated: np.ndarray

    @property
    def exists(self) -> bool:
        return self.value is not None


@dataclass
class BoundReport:
    name: str
    verdict: Verdict
    constant: Optional[float]
    reason: str = ""
    witness: List[Tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["verdict"] = self.verdict.value
        return data


# ============================================================================
# Grid evaluation helpers
# ============================================================================

def default_grid(
    start: float = GRID_START, ratio: float = GRID_RATIO, stop: float = GRID_STOP
) -> np.ndarray:
    count = int(round(np.log(stop / start) / np.log(ratio))) + 1
    return start * ratio ** np.arange(count)


def _safe_values(fn: Callable[[ArrayLike], ArrayLike], points: np.ndarray) -> np.ndarray:
    """Evaluate ``fn`` on ``points``; entries that raise or overflow become NaN."""
    points = np.asarray(points, dtype=float)
    try:
        with np.errstate(all="ignore"):
            values = np.asarray(fn(points), dtype=float)
        return np.where(np.isfinite(values), values, np.nan)
    except LabError:
        pass
    out = np.full(points.shape, np.nan)
    for i, p in enumerate(points):
        try:
            with np.errstate(all="ignore"):
                v = float(fn(float(p)))
        except LabError:
            continue
        out[i] = v if np.isfinite(v) else np.nan
    return out


def _finite_tail(
    grid: np.ndarray, values: np.ndarray, length: int = TAIL
) -> Tuple[np.ndarray, np.ndarray]:
    mask = np.isfinite(values)
    return grid[mask][-length:], values[mask][-length:]


def _witness(xs: np.ndarray, vs: np.ndarray, count: int = LIMIT_WINDOW) -> List[Tuple[float, float]]:
    return [(float(x), float(v)) for x, v in zip(xs[-count:], vs[-count:])]


def _strictly_decreasing(values: np.ndarray) -> bool:
    return bool(len(values) > 1 and np.all(np.diff(values) < 0))


def _strictly_increasing(values: np.ndarray) -> bool:
    return bool(len(values) > 1 and np.all(np.diff(values) > 0))


def _diverges(xs: np.ndarray, values: np.ndarray) -> bool:
    """Increments of ``values`` scaled by log x do not shrink over the tail.

    This accepts growth at least as fast as log log x.
    """
    if not _strictly_increasing(values):
        return False
    scaled = np.diff(values) * np.log(xs[1:])
    return bool(scaled[0] > 0 and scaled[-1] >= DIVERGENCE_RETENTION * scaled[0])


def _extrapolate_to_zero(s: np.ndarray, v: np.ndarray) -> float:
    s0, s1, s2 = s
    v0, v1, v2 = v
    return float(
        v0 * s1 * s2 / ((s0 - s1) * (s0 - s2))
        + v1 * s0 * s2 / ((s1 - s0) * (s1 - s2))
        + v2 * s0 * s1 / ((s2 - s0) * (s2 - s1))
    )


def estimate_limit(grid: np.ndarray, values: np.ndarray) -> LimitEstimate:
    """Richardson-style limit detection in the variable s = 1/log x.

    Consecutive triples are extrapolated quadratically to s = 0. The limit exists
    when the last six extrapolants agree within 1e-3; it is the final extrapolant.
    """
    xs, vs = _finite_tail(grid, values)
    if len(vs) < LIMIT_WINDOW + 2:
        return LimitEstimate(None, False, np.array([]))
    s = 1.0 / np.log(xs)
    accelerated = np.array(
        [_extrapolate_to_zero(s[i - 2 : i + 1], vs[i - 2 : i + 1]) for i in range(2, len(vs))]
    )
    diffs = np.diff(vs)
    diffs = diffs[np.abs(diffs) > 1e-12 * np.maximum(1.0, np.abs(vs[1:]))]
    signs = np.sign(diffs)
    oscillates = int(np.count_nonzero(signs[1:] != signs[:-1])) >= 2
    window = accelerated[-LIMIT_WINDOW:]
    if np.all(np.isfinite(window)) and np.ptp(window) <= LIMIT_TOLERANCE:
        return LimitEstimate(float(window[-1]), oscillates, accelerated)
    return LimitEstimate(None, oscillates, accelerated)


def _tends_to_zero(grid: np.ndarray, values: np.ndarray, name: str) -> ClassVerdict:
    xs, vs = _finite_tail(grid, np.abs(values))
    if len(vs) < TAIL:
        return ClassVerdict(name, Verdict.INCONCLUSIVE, "too few finite grid values")
    tail, previous = vs[-HALF_TAIL:], vs[:-HALF_TAIL]
    witness = _witness(xs, vs)
    if tail.max() < SUBLINEAR_FINAL and tail.max() < previous.max():
        return ClassVerdict(name, Verdict.HOLDS, "envelope below 1e-3 and shrinking", witness)
    if _strictly_decreasing(tail) and _diverges(xs[-HALF_TAIL:], 1.0 / tail):
        return ClassVerdict(name, Verdict.HOLDS, "decreasing with diverging reciprocal", witness)
    if tail[-1] >= BOUNDED_BELOW and np.all(np.diff(tail) >= 0):
        return ClassVerdict(name, Verdict.FAILS, "bounded below and non-decreasing", witness)
    limit = estimate_limit(xs, vs)
    if limit.exists and abs(limit.value) >= BOUNDED_BELOW:
        return ClassVerdict(
            name, Verdict.FAILS, "stable nonzero limit", witness, estimated_limit=limit.value
        )
    return ClassVerdict(name, Verdict.INCONCLUSIVE, "no rule fired", witness)


def _ceiling_verdict(grid: np.ndarray, values: np.ndarray, name: str) -> ClassVerdict:
    """Decide whether ``values`` stay under a stable ceiling along the grid."""
    finite = np.isfinite(values)
    if finite.any() and not finite.all():
        first = int(np.argmax(finite))
        bad_after = ~finite[first:]
        if bad_after.any():
            stop = first + int(np.argmax(bad_after))
            grown = values[first:stop]
            if len(grown) >= 2 and _strictly_increasing(grown):
                return ClassVerdict(
                    name, Verdict.FAILS, "increases until it overflows",
                    _witness(grid[first:stop], grown),
                )
    xs, vs = _finite_tail(grid, values)
    if len(vs) < MIN_TAIL:
        return ClassVerdict(name, Verdict.INCONCLUSIVE, "too few finite grid values")
    witness = _witness(xs, vs)
    if np.max(np.abs(vs)) <= VANISHING:
        return ClassVerdict(name, Verdict.HOLDS, "quantity vanishes", witness, 0.0)
    if _strictly_increasing(vs) and vs[-1] >= 10.0 * vs[0]:
        return ClassVerdict(name, Verdict.FAILS, "unbounded growth on the tail", witness)
    half = len(vs) // 2
    first_max, second_max = np.max(vs[:half]), np.max(vs[half:])
    if second_max <= first_max * (1.0 + CEILING_SLACK):
        return ClassVerdict(
            name, Verdict.HOLDS, "bounded by a stable ceiling", witness, float(np.max(vs))
        )
    return ClassVerdict(name, Verdict.INCONCLUSIVE, "ceiling still rising", witness)


# ============================================================================
# Derived functions
# ============================================================================

class InverseFunctionSpec(RealFunction):
    """a⁻¹ with derivatives from the inverse-function rules evaluated at a⁻¹(y)."""

    def __init__(self, base: RealFunction) -> None:
        if base.monotone_hint not in ("increasing", "decreasing"):
            raise NonMonotoneError(f"{base.name} is not eventually monotone")
        self.base = base
        self.name = f"inverse({base.name})"
        self.monotone_hint = base.monotone_hint
        start_value = float(base.value(base.domain_start))
        self.domain_start = start_value
        self._inverse = lru_cache(maxsize=65536)(self._inverse_scalar)

    def _inverse_scalar(self, y: float) -> float:
        return inverse_eval(self.base, y)

    def _preimages(self, y: ArrayLike) -> np.ndarray:
        ys = np.atleast_1d(np.asarray(y, dtype=float))
        return np.array([self._inverse(float(v)) for v in ys])

    def value(self, y: ArrayLike) -> ArrayLike:
        xs = self._preimages(y)
        return float(xs[0]) if np.ndim(y) == 0 else xs

    def derivative(self, order: int, y: ArrayLike) -> ArrayLike:
        if order == 0:
            return self.value(y)
        if not 1 <= order <= 3:
            raise ValueError(f"derivative order must be 0..3, got {order}")
        xs = self._preimages(y)
        d1 = np.asarray(self.base.derivative(1, xs), dtype=float)
        if order == 1:
            out = 1.0 / d1
        else:
            d2 = np.asarray(self.base.derivative(2, xs), dtype=float)
            if order == 2:
                out = -d2 / d1 ** 3
            else:
                d3 = np.asarray(self.base.derivative(3, xs), dtype=float)
                out = (3.0 * d2 ** 2 - d1 * d3) / d1 ** 5
        return float(out[0]) if np.ndim(y) == 0 else out


class ReciprocalDerivative(RealFunction):
    """x ↦ 1/a′(x)."""

    def __init__(self, base: RealFunction) -> None:
        self.base = base
        self.name = f"1/d({base.name})"
        self.domain_start = base.domain_start
        self.monotone_hint = "unknown"

    def value(self, x: ArrayLike) -> ArrayLike:
        return 1.0 / self.base.derivative(1, x)

    def derivative(self, order: int, x: ArrayLike) -> ArrayLike:
        if order == 0:
            return self.value(x)
        if order == 1:
            return -self.base.derivative(2, x) / self.base.derivative(1, x) ** 2
        raise ValueError("only the first derivative of 1/a' is available")


def compose_inverse(f: RealFunction) -> InverseFunctionSpec:
    return InverseFunctionSpec(f)


def evaluation_points(g: RealFunction) -> Tuple[np.ndarray, str]:
    """Grid for D_k and M_k; inverses are sampled at y_k = a(x_k)."""
    grid = default_grid()
    if isinstance(g, InverseFunctionSpec):
        ys = _safe_values(g.base.value, grid)
        ys = ys[np.isfinite(ys)]
        direction = "-inf" if len(ys) and ys[-1] < 0 else "+inf"
        return ys, direction
    return grid, "+inf"


# ============================================================================
# Class checks
# ============================================================================

def ratio_profile(f: RealFunction, grid: Optional[np.ndarray] = None) -> RatioProfile:
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    derivs = [_safe_values(lambda x, k=k: f.derivative(k, x), grid) for k in range(4)]
    with np.errstate(all="ignore"):
        ratios = np.array([grid * derivs[k + 1] / derivs[k] for k in range(3)])
    ratios = np.where(np.isfinite(ratios), ratios, np.nan)
    return RatioProfile(grid, ratios, ~np.isfinite(ratios))


def check_sublinear(f: RealFunction) -> ClassVerdict:
    grid = default_grid()
    values = _safe_values(f.value, grid)
    return _tends_to_zero(grid, values / grid, "SL")


def check_dominated(b: RealFunction, a: RealFunction) -> ClassVerdict:
    """b ≺ a: |b/a| tends to zero along the grid."""
    grid = default_grid()
    with np.errstate(all="ignore"):
        ratio = _safe_values(b.value, grid) / _safe_values(a.value, grid)
    verdict = _tends_to_zero(grid, ratio, "dominated")
    verdict.class_name = f"{b.name} < {a.name}"
    return verdict


def _derivative_tends_to_zero_monotonically(f: RealFunction) -> ClassVerdict:
    grid = default_grid()
    slopes = np.abs(_safe_values(lambda x: f.derivative(1, x), grid))
    xs, vs = _finite_tail(grid, slopes)
    if len(vs) < TAIL:
        return ClassVerdict("F(i)", Verdict.INCONCLUSIVE, "too few finite grid values")
    witness = _witness(xs, vs)
    if not _strictly_decreasing(vs):
        return ClassVerdict("F(i)", Verdict.FAILS, "|a'| is not decreasing on the tail", witness)
    if vs[-1] >= SUBLINEAR_FINAL and not _diverges(xs[-HALF_TAIL:], 1.0 / vs[-HALF_TAIL:]):
        return ClassVerdict("F(i)", Verdict.INCONCLUSIVE, "|a'| decreases slowly", witness)
    curvature = check_Mk(f, 1)
    if curvature.fails:
        return ClassVerdict("F(i)", Verdict.FAILS, "a'' changes sign", curvature.witness)
    if not curvature.holds:
        return ClassVerdict("F(i)", Verdict.INCONCLUSIVE, curvature.reason, curvature.witness)
    return ClassVerdict("F(i)", Verdict.HOLDS, "a' decreases monotonically to 0", witness)


def _scaled_derivative_diverges(f: RealFunction) -> ClassVerdict:
    grid = default_grid()
    scaled = grid * np.abs(_safe_values(lambda x: f.derivative(1, x), grid))
    xs, vs = _finite_tail(grid, scaled)
    if len(vs) < TAIL:
        return ClassVerdict("F(ii)", Verdict.INCONCLUSIVE, "too few finite grid values")
    witness = _witness(xs, vs)
    if not _strictly_increasing(vs[-HALF_TAIL:]):
        return ClassVerdict("F(ii)", Verdict.FAILS, "x|a'| is not increasing", witness)
    if vs[-1] > 1e3 or _diverges(xs[-HALF_TAIL:], vs[-HALF_TAIL:]):
        return ClassVerdict("F(ii)", Verdict.HOLDS, "x|a'| diverges", witness)
    return ClassVerdict("F(ii)", Verdict.INCONCLUSIVE, "x|a'| grows slowly", witness)


def _conjunction(name: str, parts: Sequence[ClassVerdict], reason: str = "") -> ClassVerdict:
    if any(p.fails for p in parts):
        failed = ", ".join(p.class_name for p in parts if p.fails)
        return ClassVerdict(name, Verdict.FAILS, f"{failed} fails", conjuncts=list(parts))
    if all(p.holds for p in parts):
        return ClassVerdict(name, Verdict.HOLDS, reason or "all conjuncts hold",
                            conjuncts=list(parts))
    open_parts = ", ".join(p.class_name for p in parts if not p.holds)
    return ClassVerdict(name, Verdict.INCONCLUSIVE, f"{open_parts} inconclusive",
                        conjuncts=list(parts))


def check_fejer(f: RealFunction) -> ClassVerdict:
    return _conjunction("F", [_derivative_tends_to_zero_monotonically(f),
                              _scaled_derivative_diverges(f)])


def check_R(f: RealFunction) -> ClassVerdict:
    profile = ratio_profile(f)
    parts = []
    for order in (1, 2, 3):
        limit = estimate_limit(profile.grid, profile.ratio(order))
        name = f"R{order}"
        xs, vs = _finite_tail(profile.grid, profile.ratio(order))
        if limit.exists:
            parts.append(ClassVerdict(name, Verdict.HOLDS, "limit detected", _witness(xs, vs),
                                      limit.value))
        elif limit.oscillates:
            parts.append(ClassVerdict(name, Verdict.FAILS, "ratio oscillates, no limit",
                                      _witness(xs, vs)))
        else:
            parts.append(ClassVerdict(name, Verdict.INCONCLUSIVE, "no limit detected",
                                      _witness(xs, vs)))
    return _conjunction("R", parts)


def check_T(f: RealFunction) -> ClassVerdict:
    profile = ratio_profile(f)
    xs, vs = _finite_tail(profile.grid, profile.ratio(1))
    witness = _witness(xs, vs)
    limit = estimate_limit(profile.grid, profile.ratio(1))
    if not limit.exists:
        if limit.oscillates:
            return ClassVerdict("T", Verdict.FAILS, "ratio oscillates, no limit", witness)
        window = limit.accelerated[-LIMIT_WINDOW:]
        if (
            len(window)
            and _strictly_decreasing(vs)
            and np.all(np.abs(window) < INTERIOR_MARGIN)
        ):
            return ClassVerdict("T", Verdict.FAILS, "ratio -> 0", witness)
        return ClassVerdict("T", Verdict.INCONCLUSIVE, "ratio has no detected limit", witness)

    value = limit.value
    if value < INTERIOR_MARGIN:
        return ClassVerdict("T", Verdict.FAILS, "ratio -> 0", witness, value)
    if value > 1.0 + INTERIOR_MARGIN:
        return ClassVerdict("T", Verdict.FAILS, "ratio limit exceeds 1", witness, value)

    higher = check_R(f).conjuncts[1:]
    if abs(value - 1.0) <= INTERIOR_MARGIN:
        fejer_i = _derivative_tends_to_zero_monotonically(f)
        verdict = _conjunction("T", [fejer_i, *higher], "ratio -> 1 and a' -> 0 monotonically")
        verdict.estimated_limit = value
        verdict.witness = witness
        return verdict
    verdict = _conjunction("T", higher, "ratio limit inside (0, 1)")
    verdict.estimated_limit = value
    verdict.witness = witness
    return verdict


def _translation_quantity(
    g: RealFunction, k: int, points: np.ndarray, radius: float = 1.0
) -> np.ndarray:
    """sup over 21 shifts h in [-radius, radius] of |g^(k+1)(y+h) / g^(k)(y)|."""
    hs = np.linspace(-radius, radius, H_POINTS)
    out = np.full(len(points), np.nan)
    for i, y in enumerate(points):
        try:
            with np.errstate(all="ignore"):
                base = float(g.derivative(k, float(y)))
                shifted = np.asarray(g.derivative(k + 1, y + hs), dtype=float)
                q = float(np.max(np.abs(shifted / base)))
        except (LabError, ZeroDivisionError):
            continue
        if np.isfinite(q) and base != 0.0:
            out[i] = q
    return out


def check_Dk(g: RealFunction, k: int) -> ClassVerdict:
    if k not in (0, 1, 2):
        raise ValueError(f"D_k is defined here for k in 0..2, got {k}")
    points, direction = evaluation_points(g)
    values = _translation_quantity(g, k, points)
    verdict = _ceiling_verdict(points, values, f"D{k}")
    logger.debug("D%d(%s) toward %s: %s (%s)", k, g.name, direction, verdict.verdict.value,
                 verdict.reason)
    verdict.reason = f"{verdict.reason}; evaluated toward {direction}"
    return verdict


def check_Mk(g: RealFunction, k: int) -> ClassVerdict:
    if k not in (0, 1, 2):
        raise ValueError(f"M_k is defined here for k in 0..2, got {k}")
    points, _ = evaluation_points(g)
    upper = _safe_values(lambda y: g.derivative(k + 1, y), points)
    lower = _safe_values(lambda y: g.derivative(k, y), points)
    scale = np.abs(lower) / np.maximum(np.abs(points), 1.0)
    signs = np.where(np.abs(upper) <= VANISHING * scale, 0.0, np.sign(upper))
    signs = np.where(np.isfinite(upper), signs, np.nan)
    xs, tail = _finite_tail(points, signs)
    _, raw = _finite_tail(points, upper)
    if len(tail) < MIN_TAIL:
        return ClassVerdict(f"M{k}", Verdict.INCONCLUSIVE, "too few finite grid values")
    if np.all(tail >= 0) or np.all(tail <= 0):
        return ClassVerdict(f"M{k}", Verdict.HOLDS, f"derivative {k + 1} keeps its sign",
                            _witness(xs, raw))
    change = int(np.argmax(tail[1:] * tail[:-1] < 0)) + 1
    witness = [(float(xs[change - 1]), float(raw[change - 1])), (float(xs[change]), float(raw[change]))]
    return ClassVerdict(f"M{k}", Verdict.FAILS, f"derivative {k + 1} changes sign", witness)


def check_S(f: RealFunction) -> ClassVerdict:
    parts = [check_sublinear(f), check_sublinear(ReciprocalDerivative(f))]
    parts[0].class_name, parts[1].class_name = "SL(a)", "SL(1/a')"
    try:
        inverse = compose_inverse(f)
    except InverseError as exc:
        parts.append(ClassVerdict("inverse", Verdict.FAILS, str(exc)))
        return _conjunction("S", parts)
    m1, d0, d1 = check_Mk(inverse, 1), check_Dk(inverse, 0), check_Dk(inverse, 1)
    d2, m2 = check_Dk(inverse, 2), check_Mk(inverse, 2)
    if d2.holds or m2.holds:
        last = ClassVerdict("D2|M2", Verdict.HOLDS, f"D2 {d2.verdict.value}, M2 {m2.verdict.value}")
    elif d2.fails and m2.fails:
        last = ClassVerdict("D2|M2", Verdict.FAILS, "both D2 and M2 fail")
    else:
        last = ClassVerdict("D2|M2", Verdict.INCONCLUSIVE,
                            f"D2 {d2.verdict.value}, M2 {m2.verdict.value}")
    for part, label in ((m1, "M1(inv)"), (d0, "D0(inv)"), (d1, "D1(inv)")):
        part.class_name = label
        parts.append(part)
    parts.append(last)
    return _conjunction("S", parts)


def d0_limit_report(f: RealFunction) -> BoundReport:
    """If the D0 quantity of a⁻¹ has a limit, that limit has to be 0."""
    inverse = compose_inverse(f)
    points, _ = evaluation_points(inverse)
    values = _translation_quantity(inverse, 0, points)
    xs, vs = _finite_tail(points, values)
    limit = estimate_limit(points, values)
    witness = _witness(xs, vs)
    if not limit.exists:
        return BoundReport("D0-limit", Verdict.INCONCLUSIVE, None, "no limit detected", witness)
    if abs(limit.value) > INTERIOR_MARGIN:
        return BoundReport("D0-limit", Verdict.FAILS, limit.value, "nonzero stable limit", witness)
    return BoundReport("D0-limit", Verdict.HOLDS, limit.value, "limit is 0", witness)


def _tail_points(f: RealFunction) -> np.ndarray:
    grid = default_grid()
    return grid[grid - 1.0 > f.domain_start][-TAIL:]


def derivative_ratio_bound(
    f: RealFunction, alpha: float, beta: float, H: float = 1.0
) -> BoundReport:
    """Empirical constant in sup_h |a′(x+h)/a(x)| ≤ C·x^(β−α−1)."""
    profile = ratio_profile(f)
    _, ratios = _finite_tail(profile.grid, profile.ratio(1))
    if len(ratios) < MIN_TAIL or ratios.min() < alpha - 1e-9 or ratios.max() > beta + 1e-9:
        return BoundReport("derivative-ratio", Verdict.FAILS, None,
                           "x a'/a leaves [alpha, beta] on the tail")
    points = _tail_points(f)
    hs = np.linspace(-H, H, H_POINTS)
    values = np.full(len(points), np.nan)
    for i, x in enumerate(points):
        try:
            with np.errstate(all="ignore"):
                shifted = np.asarray(f.derivative(1, x + hs), dtype=float)
                values[i] = np.max(np.abs(shifted / float(f.value(x)))) / x ** (beta - alpha - 1.0)
        except LabError:
            continue
    verdict = _ceiling_verdict(points, values, "derivative-ratio")
    constant = float(np.nanmax(values)) if np.isfinite(values).any() else None
    return BoundReport("derivative-ratio", verdict.verdict, constant, verdict.reason, verdict.witness)


def derivative_ratio_report(f: RealFunction, H: float = 1.0) -> BoundReport:
    """derivative_ratio_bound with α, β taken as the range of x·a′/a on the grid tail."""
    profile = ratio_profile(f)
    _, ratios = _finite_tail(profile.grid, profile.ratio(1))
    if len(ratios) < MIN_TAIL:
        return BoundReport("derivative-ratio", Verdict.INCONCLUSIVE, None,
                           "too few finite values of x a'/a")
    return derivative_ratio_bound(f, float(ratios.min()), float(ratios.max()), H)


def translate_ratio_bound(f: RealFunction, H: float = 1.0) -> BoundReport:
    """Ceiling of |a(x+ρ)/a(x)| over ρ in [-H, H] along the grid tail."""
    grid = default_grid()
    points = grid[grid - H > f.domain_start]
    rhos = np.linspace(-H, H, H_POINTS)
    values = np.full(len(points), np.nan)
    for i, x in enumerate(points):
        try:
            with np.errstate(all="ignore"):
                shifted = np.asarray(f.value(x + rhos), dtype=float)
                values[i] = np.max(np.abs(shifted / float(f.value(x))))
        except LabError:
            continue
    values = np.where(np.isfinite(values), values, np.nan)
    verdict = _ceiling_verdict(points, values, "translate-ratio")
    constant = verdict.estimated_limit
    return BoundReport("translate-ratio", verdict.verdict, constant, verdict.reason, verdict.witness)


def _inverse_check(
    check: Callable[[RealFunction, int], ClassVerdict], label: str, k: int
) -> Callable[[RealFunction], ClassVerdict]:
    def run(f: RealFunction) -> ClassVerdict:
        try:
            inverse = compose_inverse(f)
        except InverseError as exc:
            return ClassVerdict(f"{label}{k}", Verdict.FAILS, str(exc))
        return check(inverse, k)

    return run


CHECKS: Dict[str, Callable[[RealFunction], ClassVerdict]] = {
    "SL": check_sublinear,
    "F": check_fejer,
    "R": check_R,
    "T": check_T,
    "S": check_S,
    "D0": _inverse_check(check_Dk, "D", 0),
    "D1": _inverse_check(check_Dk, "D", 1),
    "D2": _inverse_check(check_Dk, "D", 2),
    "M0": _inverse_check(check_Mk, "M", 0),
    "M1": _inverse_check(check_Mk, "M", 1),
    "M2": _inverse_check(check_Mk, "M", 2),
}


def classify(f: RealFunction, classes: Iterable[str] = CLASS_NAMES) -> List[ClassVerdict]:
    """Run the requested checks. D_k and M_k are applied to the inverse a⁻¹."""
    verdicts = []
    for name in classes:
        verdict = CHECKS[name](f)
        verdict.class_name = name
        logger.debug("%s in %s: %s", f.name, name, verdict.verdict.value)
        verdicts.append(verdict)
    return verdicts


def catalog_function(name: str) -> FunctionSpec:
    if name not in CATALOG:
        raise ConfigError(f"unknown catalog function {name!r}; known: {', '.join(CATALOG)}")
    return FunctionSpec.from_text(CATALOG[name], name=name)
