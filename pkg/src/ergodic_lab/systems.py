"""
Catalog of measure-preserving systems and observables on them.

States are plain values: a float in [0, 1) for a rotation, an int in [0, q) for a
finite cycle, a tuple of factor states for a product and a ``(t, x)`` pair for a
suspension. Every ``apply_power`` accepts numpy arrays of powers and states.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import mpmath as mp
import numpy as np

from .constants import WORKING_DIGITS, HighPrecisionReal, from_mpf, resolve
from .errors import UnsupportedSystemError

logger = logging.getLogger(__name__)

EIGEN_TOLERANCE = 1e-9
_SPLITTER = 134217729.0  # 2**27 + 1

State = Any
TWO_PI_I = 2j * np.pi


# ============================================================================
# Compensated reduction
# ============================================================================

def _split(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    c = _SPLITTER * a
    high = c - (c - a)
    return high, a - high


def two_product(a: np.ndarray, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Error-free product: ``a*b == p + err`` exactly."""
    p = a * b
    a_hi, a_lo = _split(a)
    b_hi, b_lo = _split(np.asarray(b, dtype=float))
    err = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, err


def scaled_floor_frac(
    k: Union[int, np.ndarray],
    scale: HighPrecisionReal,
    offset: Union[float, HighPrecisionReal] = 0.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Floor and fractional part of ``k*scale + offset`` for integer ``k`` below 2**53."""
    off = offset if isinstance(offset, HighPrecisionReal) else HighPrecisionReal(float(offset))
    kf = np.asarray(k, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        p, err = two_product(kf, scale.hi)
    err = err + kf * scale.lo + off.lo
    whole = np.floor(p)
    rest = (p - whole) + off.hi + err
    carry = np.floor(rest)
    fractional = rest - carry
    wrap = fractional >= 1.0
    fractional = np.where(wrap, 0.0, fractional)
    floors = (whole + carry + wrap).astype(np.int64)
    return floors, fractional


def frac(value: Union[float, np.ndarray]) -> np.ndarray:
    out = np.asarray(value, dtype=float) - np.floor(value)
    return np.where(out >= 1.0, 0.0, out)


# ============================================================================
# Systems
# ============================================================================

class SystemSpec(ABC):
    kind: str = "system"

    @abstractmethod
    def apply_power(self, k: Union[int, np.ndarray], x: State) -> State:
        ...

    @abstractmethod
    def power_system(self, p: int) -> "SystemSpec":
        """The system with transformation T^p."""

    @abstractmethod
    def sample_point(self, rng: np.random.Generator) -> State:
        ...

    def describe(self) -> Dict[str, Any]:
        return {"type": self.kind}


@dataclass(frozen=True)
class CircleRotation(SystemSpec):
    """x ↦ x + θ mod 1. Rational only when built with ``(p, q)``."""

    angle: HighPrecisionReal
    rational: Optional[Tuple[int, int]] = None
    kind: str = field(default="rotation", init=False, repr=False)

    @classmethod
    def from_rational(cls, p: int, q: int) -> "CircleRotation":
        if q <= 0:
            raise UnsupportedSystemError(f"rotation denominator must be positive, got {q}")
        p = p % q
        g = math.gcd(p, q)
        p, q = p // g, q // g
        with mp.workdps(WORKING_DIGITS):
            angle = from_mpf(mp.mpf(p) / q, f"{p}/{q}")
        return cls(angle, (p, q))

    @classmethod
    def from_angle(cls, value: Union[str, float, HighPrecisionReal]) -> "CircleRotation":
        resolved = value if isinstance(value, HighPrecisionReal) else resolve(value)
        return cls(resolved.frac())

    @property
    def theta(self) -> float:
        return self.angle.hi

    @property
    def is_rational(self) -> bool:
        return self.rational is not None

    def apply_power(self, k: Union[int, np.ndarray], x: State) -> State:
        if self.rational is not None:
            p, q = self.rational
            shift = (np.asarray(k, dtype=np.int64) * p) % q / q
            out = frac(np.asarray(x, dtype=float) + shift)
        else:
            _, shift = scaled_floor_frac(k, self.angle)
            out = frac(np.asarray(x, dtype=float) + shift)
        return float(out) if np.ndim(out) == 0 else out

    def power_system(self, p: int) -> "CircleRotation":
        if self.rational is not None:
            return CircleRotation.from_rational(p * self.rational[0], self.rational[1])
        with mp.workdps(WORKING_DIGITS):
            value = self.angle.as_mpf() * p
            return CircleRotation(from_mpf(value - mp.floor(value), f"{p}*{self.angle.text}"))

    def sample_point(self, rng: np.random.Generator) -> float:
        return float(rng.random())

    def describe(self) -> Dict[str, Any]:
        if self.rational is not None:
            return {"type": self.kind, "p": self.rational[0], "q": self.rational[1]}
        return {"type": self.kind, "angle": self.angle.text or repr(self.angle.hi)}


@dataclass(frozen=True)
class FiniteCycle(SystemSpec):
    """x ↦ x + step mod q on {0, ..., q-1} with uniform measure."""

    q: int
    step: int = 1
    kind: str = field(default="cycle", init=False, repr=False)

    def __post_init__(self) -> None:
        if self.q <= 0:
            raise UnsupportedSystemError(f"cycle length must be positive, got {self.q}")

    def apply_power(self, k: Union[int, np.ndarray], x: State) -> State:
        out = (np.asarray(x, dtype=np.int64) + np.asarray(k, dtype=np.int64) * self.step) % self.q
        return int(out) if np.ndim(out) == 0 else out

    def power_system(self, p: int) -> "FiniteCycle":
        return FiniteCycle(self.q, (self.step * p) % self.q)

    def sample_point(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.q))

    def describe(self) -> Dict[str, Any]:
        return {"type": self.kind, "q": self.q, "step": self.step}


@dataclass(frozen=True)
class Product(SystemSpec):
    factors: Tuple[SystemSpec, ...]
    kind: str = field(default="product", init=False, repr=False)

    def apply_power(self, k: Union[int, np.ndarray], x: State) -> State:
        return tuple(f.apply_power(k, xi) for f, xi in zip(self.factors, x))

    def power_system(self, p: int) -> "Product":
        return Product(tuple(f.power_system(p) for f in self.factors))

    def sample_point(self, rng: np.random.Generator) -> Tuple[State, ...]:
        return tuple(f.sample_point(rng) for f in self.factors)

    def describe(self) -> Dict[str, Any]:
        return {"type": self.kind, "factors": [f.describe() for f in self.factors]}


@dataclass(frozen=True)
class Suspension(SystemSpec):
    """Mapping torus of ``base``; S translates the fibre coordinate by gamma."""

    base: SystemSpec
    gamma: HighPrecisionReal
    kind: str = field(default="suspension", init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.gamma.hi > 0:
            raise UnsupportedSystemError(f"suspension gamma must be positive, got {self.gamma.hi}")

    def apply_power(self, k: Union[int, np.ndarray], x: State) -> State:
        t, base_state = x
        jumps, t_next = scaled_floor_frac(k, self.gamma, float(t))
        if np.ndim(t_next) == 0:
            return float(t_next), self.base.apply_power(int(jumps), base_state)
        return t_next, self.base.apply_power(jumps, base_state)

    def power_system(self, p: int) -> "Suspension":
        with mp.workdps(WORKING_DIGITS):
            return Suspension(self.base, from_mpf(self.gamma.as_mpf() * p))

    def sample_point(self, rng: np.random.Generator) -> Tuple[float, State]:
        return float(rng.random()), self.base.sample_point(rng)

    def describe(self) -> Dict[str, Any]:
        return {"type": self.kind, "base": self.base.describe(), "gamma": self.gamma.hi}


def apply_power(s: SystemSpec, k: Union[int, np.ndarray], x: State) -> State:
    return s.apply_power(k, x)


def suspension_step(base: SystemSpec, gamma: HighPrecisionReal, state: Tuple[float, State]):
    """One application of S: ({t+γ}, T^[t+γ] x), with both words of γ."""
    t, x = state
    jump, u = scaled_floor_frac(1, gamma, float(t))
    return float(u), base.apply_power(int(jump), x)


def uniquely_ergodic(s: SystemSpec) -> bool:
    if isinstance(s, CircleRotation):
        return not s.is_rational
    if isinstance(s, FiniteCycle):
        return math.gcd(s.step, s.q) == 1
    if isinstance(s, Product):
        # Irrational angles are taken to be rationally independent.
        return len(s.factors) > 0 and all(
            isinstance(f, CircleRotation) and not f.is_rational for f in s.factors
        )
    return False


# ============================================================================
# Observables
# ============================================================================

class Observable(ABC):
    continuous: bool = True

    @abstractmethod
    def evaluate(self, x: State) -> np.ndarray:
        ...

    @abstractmethod
    def mean(self) -> complex:
        ...

    @abstractmethod
    def sup_norm(self) -> float:
        ...

    def __call__(self, x: State) -> np.ndarray:
        return self.evaluate(x)


@dataclass(frozen=True)
class TrigPoly(Observable):
    """Σ c_m e(m x) with e(t) = exp(2πi t)."""

    coefficients: Tuple[Tuple[int, complex], ...] = ()

    @classmethod
    def from_dict(cls, coefficients: Mapping[int, complex]) -> "TrigPoly":
        items = sorted((int(m), complex(c)) for m, c in coefficients.items() if complex(c) != 0)
        return cls(tuple(items))

    @classmethod
    def constant(cls, value: complex) -> "TrigPoly":
        return cls.from_dict({0: value})

    @classmethod
    def mode(cls, m: int, c: complex = 1.0) -> "TrigPoly":
        return cls.from_dict({m: c})

    def as_dict(self) -> Dict[int, complex]:
        return dict(self.coefficients)

    def coefficient(self, m: int) -> complex:
        return self.as_dict().get(m, 0j)

    @property
    def modes(self) -> np.ndarray:
        return np.array([m for m, _ in self.coefficients], dtype=np.int64)

    @property
    def degree(self) -> int:
        return int(np.max(np.abs(self.modes))) if self.coefficients else 0

    def evaluate(self, x: State) -> np.ndarray:
        xs = np.asarray(x, dtype=float)
        if not self.coefficients:
            return np.zeros(xs.shape, dtype=complex)
        modes = self.modes
        coeffs = np.array([c for _, c in self.coefficients], dtype=complex)
        phases = np.exp(TWO_PI_I * np.multiply.outer(xs, modes))
        return phases @ coeffs

    def mean(self) -> complex:
        return self.coefficient(0)

    def sup_norm(self) -> float:
        return float(sum(abs(c) for _, c in self.coefficients))

    def scale(self, factor: complex) -> "TrigPoly":
        return TrigPoly.from_dict({m: c * factor for m, c in self.coefficients})

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        merged = self.as_dict()
        for m, c in other.coefficients:
            merged[m] = merged.get(m, 0j) + c
        return TrigPoly.from_dict(merged)


@dataclass(frozen=True)
class Indicator(Observable):
    """Indicator of the arc [start, start + length) on the circle."""

    start: float
    length: float
    continuous: bool = field(default=False, init=False, repr=False)

    @classmethod
    def interval(cls, a: float, b: float) -> "Indicator":
        if not 0.0 <= b - a <= 1.0:
            raise UnsupportedSystemError(f"invalid arc [{a}, {b})")
        return cls(float(frac(a)), float(b - a))

    def evaluate(self, x: State) -> np.ndarray:
        offset = frac(np.asarray(x, dtype=float) - self.start)
        return (offset < self.length).astype(float)

    def mean(self) -> complex:
        return complex(self.length)

    def sup_norm(self) -> float:
        return 1.0 if self.length > 0 else 0.0


@dataclass(frozen=True)
class Tabulated(Observable):
    """Values on {0, ..., q-1}."""

    values: Tuple[complex, ...]

    def evaluate(self, x: State) -> np.ndarray:
        table = np.array(self.values, dtype=complex)
        return table[np.asarray(x, dtype=np.int64) % len(table)]

    def mean(self) -> complex:
        return complex(np.mean(np.array(self.values, dtype=complex)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(np.array(self.values, dtype=complex))))


@dataclass(frozen=True)
class TensorProduct(Observable):
    """f_1 ⊗ ... ⊗ f_d on a product state."""

    factors: Tuple[Observable, ...]

    @property
    def continuous(self) -> bool:  # type: ignore[override]
        return all(f.continuous for f in self.factors)

    def evaluate(self, x: State) -> np.ndarray:
        out: Union[np.ndarray, complex] = 1.0 + 0j
        for f, xi in zip(self.factors, x):
            out = out * f.evaluate(xi)
        return np.asarray(out)

    def mean(self) -> complex:
        return complex(np.prod([f.mean() for f in self.factors]))

    def sup_norm(self) -> float:
        return float(np.prod([f.sup_norm() for f in self.factors]))


@dataclass(frozen=True)
class JointTrigPoly(Observable):
    """Σ c_m e(m·x) over integer mode vectors m on a product of circles."""

    coefficients: Tuple[Tuple[Tuple[int, ...], complex], ...] = ()

    @classmethod
    def from_tensor(cls, tensor: TensorProduct) -> "JointTrigPoly":
        joint: Dict[Tuple[int, ...], complex] = {(): 1.0 + 0j}
        for factor in tensor.factors:
            if not isinstance(factor, TrigPoly):
                raise UnsupportedSystemError("joint modes need trigonometric factors")
            joint = {
                key + (m,): c * cm for key, c in joint.items() for m, cm in factor.coefficients
            }
        return cls.from_dict(joint)

    @classmethod
    def from_dict(cls, coefficients: Mapping[Tuple[int, ...], complex]) -> "JointTrigPoly":
        items = sorted((tuple(m), complex(c)) for m, c in coefficients.items() if complex(c) != 0)
        return cls(tuple(items))

    def evaluate(self, x: State) -> np.ndarray:
        coords = [np.asarray(xi, dtype=float) for xi in x]
        out = np.zeros(np.broadcast(*coords).shape, dtype=complex)
        for modes, c in self.coefficients:
            phase = sum(m * xi for m, xi in zip(modes, coords))
            out = out + c * np.exp(TWO_PI_I * phase)
        return out

    def mean(self) -> complex:
        return sum((c for m, c in self.coefficients if not any(m)), 0j)

    def sup_norm(self) -> float:
        return float(sum(abs(c) for _, c in self.coefficients))


@dataclass(frozen=True)
class ShiftAverage(Observable):
    """(1/q) Σ_{j<q} f(x + j/q): the average over a finite rotation orbit."""

    base: Observable
    q: int

    @property
    def continuous(self) -> bool:  # type: ignore[override]
        return self.base.continuous

    def evaluate(self, x: State) -> np.ndarray:
        xs = np.asarray(x, dtype=float)
        total = np.zeros(xs.shape, dtype=complex)
        for j in range(self.q):
            total = total + self.base.evaluate(frac(xs + j / self.q))
        return total / self.q

    def mean(self) -> complex:
        return self.base.mean()

    def sup_norm(self) -> float:
        return self.base.sup_norm()


@dataclass(frozen=True)
class LiftedObservable(Observable):
    """f̃(t, x) = f(x) on a suspension."""

    base: Observable

    def evaluate(self, x: State) -> np.ndarray:
        _, base_state = x
        return self.base.evaluate(base_state)

    def mean(self) -> complex:
        return self.base.mean()

    def sup_norm(self) -> float:
        return self.base.sup_norm()


def lift_observable(f: Observable) -> LiftedObservable:
    return LiftedObservable(f)


def compose_power(s: SystemSpec, f: Observable, k: int) -> Observable:
    """f ∘ T^k as an observable of the same kind where that is closed-form."""
    if isinstance(s, CircleRotation):
        if isinstance(f, TrigPoly):
            return TrigPoly.from_dict(
                {m: c * np.exp(TWO_PI_I * float(s.apply_power(k * m, 0.0)))
                 for m, c in f.coefficients}
            )
        if isinstance(f, Indicator):
            return Indicator(float(frac(f.start - s.apply_power(k, 0.0))), f.length)
    if isinstance(s, FiniteCycle) and isinstance(f, Tabulated):
        return Tabulated(tuple(f.evaluate(s.apply_power(k, np.arange(s.q)))))
    raise UnsupportedSystemError(f"no closed-form composition for {type(f).__name__} on {s.kind}")


# ============================================================================
# Space averages, conditional expectations, eigenprojections
# ============================================================================

def space_average(s: SystemSpec, f: Observable) -> complex:
    if isinstance(s, Product) and isinstance(f, TensorProduct):
        return complex(np.prod([space_average(si, fi) for si, fi in zip(s.factors, f.factors)]))
    return f.mean()


def _cycle_coset_average(s: FiniteCycle, f: Tabulated) -> Tabulated:
    if len(f.values) != s.q:
        raise UnsupportedSystemError(f"table has {len(f.values)} values for a cycle of {s.q}")
    g = math.gcd(s.step, s.q)
    values = np.array(f.values, dtype=complex)
    means = np.array([values[r::g].mean() for r in range(g)])
    return Tabulated(tuple(means[np.arange(s.q) % g]))


def _joint_invariant(s: Product, f: JointTrigPoly) -> JointTrigPoly:
    for factor in s.factors:
        if not isinstance(factor, CircleRotation):
            raise UnsupportedSystemError("joint conditional expectation needs rotation factors")

    def invariant(modes: Tuple[int, ...]) -> bool:
        total = Fraction(0)
        for m, factor in zip(modes, s.factors):
            if m == 0:
                continue
            if factor.rational is None:
                return False
            total += Fraction(m * factor.rational[0], factor.rational[1])
        return total.denominator == 1

    kept = {m: c for m, c in f.coefficients if invariant(m)}
    return JointTrigPoly.from_dict(kept)


def cond_exp_invariant(s: SystemSpec, f: Observable) -> Observable:
    """E(f | I(T)) for rotations, cycles and products of rotations."""
    if isinstance(s, CircleRotation):
        if s.rational is None:
            return TrigPoly.constant(f.mean())
        q = s.rational[1]
        if isinstance(f, TrigPoly):
            return TrigPoly.from_dict({m: c for m, c in f.coefficients if m % q == 0})
        if q == 1:
            return f
        return ShiftAverage(f, q)
    if isinstance(s, FiniteCycle):
        if not isinstance(f, Tabulated):
            raise UnsupportedSystemError("observables on a cycle must be tabulated")
        return _cycle_coset_average(s, f)
    if isinstance(s, Product):
        if isinstance(f, TensorProduct):
            if all(isinstance(g, TrigPoly) for g in f.factors):
                return _joint_invariant(s, JointTrigPoly.from_tensor(f))
            if uniquely_ergodic(s):
                return TrigPoly.constant(f.mean())
        if isinstance(f, JointTrigPoly):
            return _joint_invariant(s, f)
    raise UnsupportedSystemError(
        f"no closed-form conditional expectation for {type(f).__name__} on {s.kind}"
    )


def cond_exp_power(s: SystemSpec, p: int, f: Observable) -> Observable:
    if p == 0:
        raise ValueError("power must be nonzero")
    return cond_exp_invariant(s.power_system(p), f)


def eigenprojection(s: SystemSpec, gamma: Union[float, HighPrecisionReal], m: int,
                    f: Observable) -> TrigPoly:
    """Keep the modes k with k·θ ≡ m/γ (mod 1), i.e. T e_k = e(m/γ) e_k."""
    if not isinstance(s, CircleRotation):
        raise UnsupportedSystemError("eigenprojections are defined for circle rotations")
    if not isinstance(f, TrigPoly):
        raise UnsupportedSystemError("eigenprojections need a trigonometric polynomial")
    target = _eigen_phase(gamma, m)
    kept = {}
    for k, c in f.coefficients:
        rotated = float(s.apply_power(k, 0.0))
        if _circle_distance(rotated, target) <= EIGEN_TOLERANCE:
            kept[k] = c
    return TrigPoly.from_dict(kept)


def _eigen_phase(gamma: Union[float, HighPrecisionReal], m: int) -> float:
    with mp.workdps(WORKING_DIGITS):
        g = gamma.as_mpf() if isinstance(gamma, HighPrecisionReal) else mp.mpf(repr(float(gamma)))
        value = mp.mpf(m) / g
        return float(value - mp.floor(value))


def _circle_distance(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def matched_eigen_index(
    s: CircleRotation, gamma: Union[float, HighPrecisionReal], k: int
) -> Optional[int]:
    """Smallest |m| with k·θ ≡ m/γ (mod 1), or None."""
    with mp.workdps(WORKING_DIGITS):
        g = gamma.as_mpf() if isinstance(gamma, HighPrecisionReal) else mp.mpf(repr(float(gamma)))
        k_theta = k * s.angle.as_mpf()
        candidates = {int(mp.nint(g * (k_theta - j))) for j in range(-abs(k) - 1, abs(k) + 2)}
    phase = float(s.apply_power(k, 0.0))
    best: Optional[int] = None
    for m in sorted(candidates):
        if _circle_distance(phase, _eigen_phase(gamma, m)) <= EIGEN_TOLERANCE:
            if best is None or abs(m) < abs(best) or (abs(m) == abs(best) and m > best):
                best = m
    return best


def sup_norm_product(observables: Iterable[Observable]) -> float:
    return float(np.prod([f.sup_norm() for f in observables]))


def point_from_values(s: SystemSpec, values: Sequence[Any]) -> State:
    """Build a canonical state from config values (nested lists for products)."""
    if isinstance(s, CircleRotation):
        return float(frac(float(values[0] if isinstance(values, (list, tuple)) else values)))
    if isinstance(s, FiniteCycle):
        return int(values[0] if isinstance(values, (list, tuple)) else values) % s.q
    if isinstance(s, Product):
        return tuple(point_from_values(f, v) for f, v in zip(s.factors, values))
    if isinstance(s, Suspension):
        t, x = values
        return float(frac(float(t))), point_from_values(s.base, x)
    raise UnsupportedSystemError(f"unknown system {s!r}")


__all__: List[str] = [
    "CircleRotation",
    "FiniteCycle",
    "Product",
    "Suspension",
    "SystemSpec",
    "Observable",
    "TrigPoly",
    "Indicator",
    "Tabulated",
    "TensorProduct",
    "JointTrigPoly",
    "ShiftAverage",
    "LiftedObservable",
    "apply_power",
    "space_average",
    "cond_exp_invariant",
    "cond_exp_power",
    "eigenprojection",
    "suspension_step",
    "lift_observable",
    "uniquely_ergodic",
    "scaled_floor_frac",
]
