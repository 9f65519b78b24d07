"""
Floor-iterate sequences, multiple ergodic averages, occupancy tables and the
empirical-measure diagnostics built on them.

Averages are summed in fixed blocks of 4096 terms. Inside a block the terms are
spread over 64 lanes that are Kahan-summed along 64 steps and then added pairwise;
block sums are added pairwise in block order. The result therefore does not depend
on how blocks are distributed over worker threads.
"""

from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import mpmath as mp
import numpy as np

from .constants import WORKING_DIGITS, HighPrecisionReal
from .errors import (
    ConfigError,
    ExprDomainError,
    GrowthOrderError,
    InverseError,
    UnsupportedSystemError,
)
from .expr import FunctionSpec, RealFunction, inverse_eval
from .funclass import check_dominated
from .systems import (
    Observable,
    State,
    SystemSpec,
    TensorProduct,
    compose_power,
    scaled_floor_frac,
    sup_norm_product,
    suspension_step,
)

logger = logging.getLogger(__name__)

BLOCK = 4096
LANES = 64
DEFAULT_BUDGET = 10**7
DEFAULT_FIRST_CHECKPOINT = 1000


# ============================================================================
# Iterates
# ============================================================================

@dataclass(frozen=True)
class SublinearSource:
    f: RealFunction

    @property
    def name(self) -> str:
        return self.f.name


@dataclass(frozen=True)
class LinearSource:
    """n ↦ slope·n + offset, with slope = p/q exactly when ``rational`` is set."""

    slope: HighPrecisionReal
    offset: HighPrecisionReal = HighPrecisionReal(0.0)
    rational: Optional[Tuple[int, int]] = None

    @classmethod
    def from_rational(cls, p: int, q: int, offset: float = 0.0) -> "LinearSource":
        if q <= 0 or p == 0:
            raise ConfigError(f"linear slope p/q needs p != 0 and q > 0, got {p}/{q}")
        g = math.gcd(p, q)
        p, q = p // g, q // g
        with mp.workdps(WORKING_DIGITS):
            value = mp.mpf(p) / q
            hi = float(value)
            slope = HighPrecisionReal(hi, float(value - hi), f"{p}/{q}")
        return cls(slope, HighPrecisionReal(float(offset)), (p, q))

    @property
    def name(self) -> str:
        return f"{self.slope.text or self.slope.hi!r}*n+{self.offset.hi!r}"

    def as_function(self) -> FunctionSpec:
        return FunctionSpec.affine(self.slope.hi, self.offset.hi)


IterateSource = Union[SublinearSource, LinearSource]


class IterateSequence:
    """[a(n)] for n = 0, 1, ... with a cache that only grows."""

    def __init__(self, source: IterateSource, budget: int = DEFAULT_BUDGET) -> None:
        self.source = source
        self.budget = budget
        self._floors = np.zeros(0, dtype=np.int64)
        self._lock = threading.Lock()

    @classmethod
    def sublinear(cls, f: RealFunction, budget: int = DEFAULT_BUDGET) -> "IterateSequence":
        return cls(SublinearSource(f), budget)

    @classmethod
    def linear(
        cls,
        slope: Union[float, HighPrecisionReal],
        offset: Union[float, HighPrecisionReal] = 0.0,
        budget: int = DEFAULT_BUDGET,
    ) -> "IterateSequence":
        s = slope if isinstance(slope, HighPrecisionReal) else HighPrecisionReal(float(slope))
        o = offset if isinstance(offset, HighPrecisionReal) else HighPrecisionReal(float(offset))
        return cls(LinearSource(s, o), budget)

    @classmethod
    def linear_rational(
        cls, p: int, q: int, offset: float = 0.0, budget: int = DEFAULT_BUDGET
    ) -> "IterateSequence":
        return cls(LinearSource.from_rational(p, q, offset), budget)

    @property
    def name(self) -> str:
        return self.source.name

    @property
    def is_linear(self) -> bool:
        return isinstance(self.source, LinearSource)

    def as_function(self) -> RealFunction:
        if isinstance(self.source, LinearSource):
            return self.source.as_function()
        return self.source.f

    def floors(self, N: int) -> np.ndarray:
        if N > self.budget:
            raise ConfigError(f"N={N} exceeds the iterate budget {self.budget}")
        with self._lock:
            if len(self._floors) < N:
                extra = self._compute(np.arange(len(self._floors), N, dtype=np.int64))
                self._floors = np.concatenate([self._floors, extra])
            return self._floors[:N]

    def _compute(self, n: np.ndarray) -> np.ndarray:
        source = self.source
        if isinstance(source, LinearSource):
            if source.rational is not None:
                p, q = source.rational
                whole = (n * p) // q
                rest = np.floor(((n * p) % q) / q + source.offset.hi).astype(np.int64)
                return whole + rest
            floors, _ = scaled_floor_frac(n, source.slope, source.offset)
            return floors
        out = np.zeros(len(n), dtype=np.int64)
        live = n >= source.f.domain_start
        if live.any():
            try:
                values = np.asarray(source.f.value(n[live].astype(float)), dtype=float)
            except ExprDomainError as exc:
                raise ExprDomainError(
                    f"{source.f.name} failed past its domain start: {exc}", exc.node
                ) from exc
            if not np.all(np.isfinite(values)):
                raise ExprDomainError(f"{source.f.name} is not finite on the requested range")
            out[live] = np.floor(values).astype(np.int64)
        return out


def floor_iterates(a: IterateSequence, N: int) -> np.ndarray:
    return a.floors(N).copy()


# ============================================================================
# Experiments and averages
# ============================================================================

@dataclass
class ExperimentSpec:
    systems: List[SystemSpec]
    observables: List[Observable]
    iterates: List[IterateSequence]
    starts: List[State]
    coupling: str = "product"
    schedule: List[int] = field(default_factory=list)
    seed: Optional[int] = None
    decisions: List[str] = field(default_factory=list)

    @property
    def d(self) -> int:
        return len(self.iterates)

    def __post_init__(self) -> None:
        sizes = {len(self.systems), len(self.observables), len(self.iterates), len(self.starts)}
        if len(sizes) != 1:
            raise ConfigError(
                "systems, observables, iterates and start points must have the same length"
            )

    def validate_growth_order(self) -> None:
        """a_{i+1} ≺ a_i on the grid, and a′_{i+1} ≺ a′_i when every iterate is sublinear."""
        functions = [it.as_function() for it in self.iterates]
        for i in range(1, len(functions)):
            verdict = check_dominated(functions[i], functions[i - 1])
            if not verdict.holds:
                raise GrowthOrderError(
                    f"iterate {i + 1} ({functions[i].name}) is not dominated by iterate {i} "
                    f"({functions[i - 1].name}): {verdict.reason}"
                )
        if all(not it.is_linear for it in self.iterates):
            derivatives = [_Derivative(f) for f in functions]
            for i in range(1, len(derivatives)):
                verdict = check_dominated(derivatives[i], derivatives[i - 1])
                if not verdict.holds:
                    raise GrowthOrderError(
                        f"derivative of iterate {i + 1} is not dominated by that of iterate {i}: "
                        f"{verdict.reason}"
                    )

    @property
    def bound(self) -> float:
        return sup_norm_product(self.observables)


class _Derivative(RealFunction):
    def __init__(self, base: RealFunction) -> None:
        self.base = base
        self.name = f"d({base.name})"
        self.domain_start = base.domain_start
        self.monotone_hint = "unknown"

    def value(self, x):
        return self.base.derivative(1, x)

    def derivative(self, order: int, x):
        return self.base.derivative(order + 1, x)


def _pairwise(values: Sequence[complex]) -> complex:
    items = list(values)
    if not items:
        return 0j
    while len(items) > 1:
        if len(items) % 2:
            items.append(0j)
        items = [items[i] + items[i + 1] for i in range(0, len(items), 2)]
    return items[0]


def _kahan_block(values: np.ndarray) -> complex:
    padded = np.zeros(BLOCK, dtype=complex)
    padded[: len(values)] = values
    steps = padded.reshape(BLOCK // LANES, LANES)
    parts = []
    for component in (steps.real, steps.imag):
        total = np.zeros(LANES)
        carry = np.zeros(LANES)
        for row in component:
            y = row - carry
            t = total + y
            carry = (t - total) - y
            total = t
        parts.append(_pairwise(list(total)))
    return complex(parts[0].real, parts[1].real)


TermFunction = Callable[[int, int], np.ndarray]


class BlockSummer:
    """Deterministic block sums of ``terms(lo, hi)`` with cached full blocks."""

    def __init__(self, terms: TermFunction, workers: int = 1) -> None:
        self.terms = terms
        self.workers = max(1, int(workers))
        self._full: List[complex] = []

    def _block(self, index: int, stop: Optional[int] = None) -> complex:
        lo = index * BLOCK
        hi = lo + BLOCK if stop is None else stop
        return _kahan_block(self.terms(lo, hi))

    def _ensure_full(self, count: int) -> None:
        missing = list(range(len(self._full), count))
        if not missing:
            return
        if self.workers == 1 or len(missing) == 1:
            self._full.extend(self._block(i) for i in missing)
            return
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            self._full.extend(pool.map(self._block, missing))

    def total(self, N: int) -> complex:
        full, rest = divmod(N, BLOCK)
        self._ensure_full(full)
        sums = self._full[:full]
        if rest:
            sums = sums + [self._block(full, full * BLOCK + rest)]
        return _pairwise(sums)

    def mean(self, N: int) -> complex:
        if N <= 0:
            raise ConfigError(f"N must be positive, got {N}")
        return self.total(N) / N


def orbit_states(spec: ExperimentSpec, lo: int, hi: int) -> List[State]:
    states = []
    for system, iterate, start in zip(spec.systems, spec.iterates, spec.starts):
        powers = iterate.floors(hi)[lo:hi]
        states.append(system.apply_power(powers, start))
    return states


def _product_terms(spec: ExperimentSpec) -> TermFunction:
    def terms(lo: int, hi: int) -> np.ndarray:
        out = np.ones(hi - lo, dtype=complex)
        for f, state in zip(spec.observables, orbit_states(spec, lo, hi)):
            out = out * np.broadcast_to(f.evaluate(state), out.shape)
        return out

    return terms


def _prefetch(spec: ExperimentSpec, N: int) -> None:
    for iterate in spec.iterates:
        iterate.floors(N)


def multiple_average(spec: ExperimentSpec, N: int, workers: int = 1) -> complex:
    """A_N = (1/N) Σ_{n<N} Π_i f_i(T_i^[a_i(n)] x_i)."""
    _prefetch(spec, N)
    return BlockSummer(_product_terms(spec), workers).mean(N)


@dataclass
class AverageTrace:
    checkpoints: List[int]
    values: List[complex]
    bound: float

    @property
    def cauchy_defects(self) -> List[float]:
        return [abs(b - a) for a, b in zip(self.values, self.values[1:])]

    def within_bound(self, slack: float = 1e-12) -> bool:
        return all(abs(v) <= self.bound * (1.0 + slack) for v in self.values)


def default_schedule(budget: int, first: int = DEFAULT_FIRST_CHECKPOINT) -> List[int]:
    schedule = []
    n = first
    while n <= budget:
        schedule.append(n)
        n *= 2
    return schedule


def trace(
    spec: ExperimentSpec, schedule: Optional[Sequence[int]] = None, workers: int = 1
) -> AverageTrace:
    """A_N at each checkpoint, reusing full-block sums between checkpoints."""
    checkpoints = sorted(set(schedule or spec.schedule or default_schedule(DEFAULT_BUDGET)))
    if not checkpoints:
        raise ConfigError("empty checkpoint schedule")
    _prefetch(spec, checkpoints[-1])
    summer = BlockSummer(_product_terms(spec), workers)
    values = []
    for N in checkpoints:
        values.append(summer.mean(N))
        logger.debug("checkpoint N=%d A_N=%s", N, values[-1])
    return AverageTrace(list(checkpoints), values, spec.bound)


# ============================================================================
# Occupancy
# ============================================================================

@dataclass
class OccupancyTable:
    """Counts U of the times n < N whose floor vector equals each box."""

    boxes: np.ndarray
    counts: np.ndarray
    N: int
    iterates: List[IterateSequence] = field(default_factory=list, repr=False)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> Dict[Tuple[int, ...], int]:
        return {tuple(int(v) for v in box): int(c) for box, c in zip(self.boxes, self.counts)}

    def count(self, box: Sequence[int]) -> int:
        return self.as_dict().get(tuple(int(v) for v in box), 0)

    def marginal(self, i: int = 0) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for box, c in zip(self.boxes, self.counts):
            out[int(box[i])] = out.get(int(box[i]), 0) + int(c)
        return out

    def predicted_interval(self, i: int, b: int) -> Tuple[float, float]:
        """(C, C′) = (min, max) of a_i⁻¹(b) and a_i⁻¹(b+1)."""
        ends = (_inverse_at(self.iterates[i], b), _inverse_at(self.iterates[i], b + 1))
        return min(ends), max(ends)

    def predicted_count(self, i: int, b: int) -> int:
        """Integers n in [a⁻¹(b), a⁻¹(b+1)) for increasing a, snapped to exact boundaries."""
        lo, hi = self.predicted_interval(i, b)
        iterate = self.iterates[i]
        return max(0, _first_reaching(iterate, b + 1, hi) - _first_reaching(iterate, b, lo))


def _first_reaching(iterate: IterateSequence, level: int, guess: float) -> int:
    """Smallest n >= 0 near ``guess`` with a(n) >= level, checked against a itself."""
    f = iterate.as_function()

    def reaches(n: int) -> bool:
        if n < f.domain_start:
            return level <= 0
        return float(f.value(float(n))) >= level

    n = max(0, math.ceil(guess))
    while n > 0 and reaches(n - 1):
        n -= 1
    while not reaches(n):
        n += 1
    return n


def _inverse_at(iterate: IterateSequence, y: float) -> float:
    source = iterate.source
    if isinstance(source, LinearSource):
        return (y - source.offset.hi) / source.slope.hi
    try:
        return inverse_eval(source.f, float(y))
    except InverseError:
        return float(source.f.domain_start)


def occupancy(iterates: Sequence[IterateSequence], N: int) -> OccupancyTable:
    floors = np.column_stack([it.floors(N) for it in iterates])
    boxes, counts = np.unique(floors, axis=0, return_counts=True)
    return OccupancyTable(boxes, counts, N, list(iterates))


@dataclass
class TermDecomposition:
    shared: float
    appears: float
    disappears: float

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.shared, self.appears, self.disappears


def term_decomposition(iterates: Sequence[IterateSequence], N: int) -> TermDecomposition:
    """Magnitudes of the three terms comparing boxes b₁ and b₁−1 with the same b⃗*.

    shared: Σ |U(b₁) − U(b₁−1)| over boxes where both are occupied.
    appears: Σ U(b₁) over occupied boxes whose left neighbour is empty.
    disappears: Σ U(b₁) over occupied boxes whose right neighbour is empty.
    """
    table = occupancy(iterates, N)
    boxes, counts = table.boxes, table.counts
    order = np.lexsort([boxes[:, 0]] + [boxes[:, j] for j in range(1, boxes.shape[1])])
    boxes, counts = boxes[order], counts[order]
    rest = boxes[:, 1:]
    same_rest = np.all(rest[1:] == rest[:-1], axis=1)
    adjacent = same_rest & (boxes[1:, 0] == boxes[:-1, 0] + 1)
    has_left = np.concatenate([[False], adjacent])
    has_right = np.concatenate([adjacent, [False]])
    shared = np.abs(counts[1:] - counts[:-1])[adjacent].sum()
    appears = counts[~has_left].sum()
    disappears = counts[~has_right].sum()
    return TermDecomposition(shared / N, appears / N, disappears / N)


# ============================================================================
# Invariance and equidistribution diagnostics
# ============================================================================

def invariance_shift(spec: ExperimentSpec) -> int:
    first = spec.iterates[0].source
    if isinstance(first, LinearSource) and first.rational is not None:
        return first.rational[0]
    return 1


def invariance_defect(
    spec: ExperimentSpec,
    N: int,
    g: Observable,
    r: Optional[int] = None,
    workers: int = 1,
) -> float:
    """|∫g dλ_N − ∫g d((T₁^r × id × ⋯) λ_N)|."""
    shift = invariance_shift(spec) if r is None else r
    first = spec.systems[0]
    _prefetch(spec, N)
    single = spec.d == 1 and not isinstance(g, TensorProduct)
    # g ∘ T^r in closed form, when the observable allows it
    moved_g: Optional[Observable] = None
    if single:
        try:
            moved_g = compose_power(first, g, shift)
        except UnsupportedSystemError:
            logger.debug(f"no closed-form g∘T^{shift} on {first.kind}, moving the states")

    def evaluate(states: List[State]) -> np.ndarray:
        if single:
            return np.asarray(g.evaluate(states[0]))
        return np.asarray(g.evaluate(tuple(states)))

    def terms(lo: int, hi: int) -> np.ndarray:
        states = orbit_states(spec, lo, hi)
        if moved_g is not None:
            moved_values = np.asarray(moved_g.evaluate(states[0]))
        else:
            moved_values = evaluate([first.apply_power(shift, states[0])] + states[1:])
        return np.broadcast_to(evaluate(states) - moved_values, (hi - lo,))

    return abs(BlockSummer(terms, workers).mean(N))


def hits_linear_floor(
    gamma: Union[float, HighPrecisionReal], ell: Union[float, HighPrecisionReal], m: int
) -> bool:
    """Whether m = [γn + ℓ] for some integer n."""
    with mp.workdps(WORKING_DIGITS):
        g = gamma.as_mpf() if isinstance(gamma, HighPrecisionReal) else mp.mpf(repr(float(gamma)))
        offset = ell.as_mpf() if isinstance(ell, HighPrecisionReal) else mp.mpf(repr(float(ell)))
        if g <= 1:
            return True
        value = (m - offset) / g
        fractional = value - mp.floor(value)
        return bool(fractional == 0 or (1 - 1 / g < fractional < 1))


def discrepancy(points: Sequence[float]) -> float:
    """Star discrepancy of a finite sample on [0, 1)."""
    xs = np.sort(np.asarray(points, dtype=float) % 1.0)
    n = len(xs)
    if n == 0:
        raise ValueError("discrepancy of an empty sample")
    targets = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    return float(1.0 / (2.0 * n) + np.max(np.abs(xs - targets)))


@dataclass
class LevelProfile:
    levels: np.ndarray
    counts: np.ndarray
    cumulative: np.ndarray
    sup_ratio: float
    almost_increasing: float


def level_profile(a: IterateSequence, N: int, bulk: float = 0.1) -> LevelProfile:
    """φ(b) = #{n<N : [a(n)] = b}, Φ its running sum, sup b·φ/Φ and the almost-increasing constant."""
    floors = a.floors(N)
    low = int(floors.min())
    counts = np.bincount(floors - low)
    levels = np.arange(low, low + len(counts))
    cumulative = np.cumsum(counts)
    positive = (levels >= 1) & (cumulative > 0)
    sup_ratio = float(np.max(levels[positive] * counts[positive] / cumulative[positive])) if (
        positive.any()
    ) else 0.0
    top = levels[-1]
    window = (levels >= bulk * top) & (levels < (1.0 - bulk) * top) & (counts > 0)
    phi = counts[window].astype(float)
    if len(phi):
        running = np.maximum.accumulate(phi)
        almost = float(np.max(running / phi))
    else:
        almost = float("nan")
    return LevelProfile(levels, counts, cumulative, sup_ratio, almost)


def suspension_orbit(
    base: SystemSpec, gamma: HighPrecisionReal, state: Tuple[float, State], N: int
) -> Tuple[np.ndarray, List[State]]:
    """Sequential iteration of S from ``state``: returns t_n and x_n for n < N."""
    ts = np.empty(N)
    xs: List[State] = []
    current = state
    for n in range(N):
        ts[n] = current[0]
        xs.append(current[1])
        current = suspension_step(base, gamma, current)
    return ts, xs


def draw_start_points(
    systems: Sequence[SystemSpec], coupling: str, seed: int
) -> List[State]:
    """Seeded start points; ``diagonal`` reuses one point where the systems coincide."""
    rng = np.random.default_rng(seed)
    if coupling == "diagonal":
        point = systems[0].sample_point(rng)
        out = []
        for s in systems:
            out.append(point if type(s) is type(systems[0]) else s.sample_point(rng))
        return out
    return [s.sample_point(rng) for s in systems]
