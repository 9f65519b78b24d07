"""Closed-form predicted limits and the oracles used to cross-check them."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import mpmath as mp
import numpy as np

from .constants import WORKING_DIGITS, HighPrecisionReal, from_mpf
from .engine import (
    BlockSummer,
    ExperimentSpec,
    IterateSequence,
    LinearSource,
    SublinearSource,
)
from .errors import OracleMismatch, UnsupportedSystemError
from .systems import (
    CircleRotation,
    Observable,
    State,
    SystemSpec,
    TrigPoly,
    cond_exp_invariant,
    cond_exp_power,
    eigenprojection,
    matched_eigen_index,
    space_average,
    uniquely_ergodic,
)

logger = logging.getLogger(__name__)

ORACLE_SAMPLES = 100_000
ORACLE_TOLERANCE = 1e-3

Real = Union[float, HighPrecisionReal]


@dataclass
class LimitPrediction:
    value: complex
    provenance: str
    modes: List[int] = field(default_factory=list)
    truncation: Optional[int] = None
    tail_bound: float = 0.0
    observable: Optional[Observable] = None
    decisions: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "re": self.value.real,
            "im": self.value.imag,
            "provenance": self.provenance,
            "modes": list(self.modes),
            "truncation": self.truncation,
            "tail_bound": self.tail_bound,
            "decisions": list(self.decisions),
        }


def _as_hpr(value: Real) -> HighPrecisionReal:
    if isinstance(value, HighPrecisionReal):
        return value
    return HighPrecisionReal(float(value))


def _trailing_product(spec: ExperimentSpec, first: int = 1) -> complex:
    out = 1.0 + 0j
    for s, f, x in zip(spec.systems[first:], spec.observables[first:], spec.starts[first:]):
        out *= complex(np.asarray(cond_exp_invariant(s, f).evaluate(x)).item())
    return out


def _value_at(f: Observable, x: State) -> complex:
    return complex(np.asarray(f.evaluate(x)).item())


# ============================================================================
# Sublinear and rational linear iterates
# ============================================================================

def predicted_limit_sublinear(spec: ExperimentSpec) -> LimitPrediction:
    """Π_i E(f_i | I(T_i))(x_i)."""
    value = _trailing_product(spec, first=0)
    return LimitPrediction(value, "sublinear: product of conditional expectations")


def predicted_limit_linear_rational(spec: ExperimentSpec) -> LimitPrediction:
    """(1/q) Σ_{j<q} E(T₁^[pj/q+ℓ] f₁ | I(T₁^p))(x₁) · Π_{i≥2} E(f_i | I(T_i))(x_i)."""
    source = spec.iterates[0].source
    if not isinstance(source, LinearSource) or source.rational is None:
        raise UnsupportedSystemError("the rational formula needs a rational linear first iterate")
    p, q = source.rational
    system, f, x = spec.systems[0], spec.observables[0], spec.starts[0]
    projected = cond_exp_power(system, p, f)
    total = 0j
    for j in range(q):
        power = (p * j) // q + math.floor(((p * j) % q) / q + source.offset.hi)
        total += _value_at(projected, system.apply_power(power, x))
    value = total / q * _trailing_product(spec)
    return LimitPrediction(value, f"linear rational: slope {p}/{q}, average of {q} shifts")


# ============================================================================
# Irrational linear iterates
# ============================================================================

def fourier_coefficient(gamma: Real, ell: Real, m: int) -> complex:
    """e(mℓ/γ) · (e(−m/γ) − 1) / (−2πi m/γ); 1 at m = 0."""
    if m == 0:
        return 1.0 + 0j
    g, offset = float(gamma), float(ell)
    u = 2.0 * math.pi * m / g
    return complex(np.exp(1j * u * offset) * (np.exp(-1j * u) - 1.0) / (-1j * u))


@dataclass
class MeanErgodicLimit:
    """Σ_m c_m(γ, ℓ) · P_m f, with P_m the eigenprojection for e(m/γ)."""

    observable: TrigPoly
    matched: Dict[int, int]
    unmatched: List[int]

    @property
    def truncation(self) -> int:
        return max((abs(m) for m in self.matched.values()), default=0)

    def evaluate(self, x: State) -> complex:
        return _value_at(self.observable, x)


def mean_ergodic_limit(
    system: SystemSpec, gamma: Real, ell: Real, f: Observable
) -> MeanErgodicLimit:
    """Limit of (1/N) Σ f(T^[γn+ℓ] x) as an observable of x.

    Modes that match no eigenvalue e(m/γ) contribute 0; a mode k matched by m is
    multiplied by the scalar c_m.
    """
    if not isinstance(system, CircleRotation):
        raise UnsupportedSystemError("mean ergodic limits are available for circle rotations")
    if not isinstance(f, TrigPoly):
        raise UnsupportedSystemError("mean ergodic limits need a trigonometric polynomial")
    gamma = _as_hpr(gamma)
    matched: Dict[int, int] = {}
    unmatched: List[int] = []
    for k, _ in f.coefficients:
        m = matched_eigen_index(system, gamma, k)
        if m is None:
            unmatched.append(k)
        else:
            matched[k] = m
    total = TrigPoly()
    for m in sorted(set(matched.values())):
        total = total + eigenprojection(system, gamma, m, f).scale(fourier_coefficient(gamma, ell, m))
    logger.debug("mean ergodic limit: matched=%s unmatched=%s", matched, unmatched)
    return MeanErgodicLimit(total, matched, unmatched)


def predicted_limit_linear_irrational(spec: ExperimentSpec) -> LimitPrediction:
    """F(x₁) · Π_{i≥2} E(f_i | I(T_i))(x_i)."""
    source = spec.iterates[0].source
    if not isinstance(source, LinearSource):
        raise UnsupportedSystemError("the irrational formula needs a linear first iterate")
    limit = mean_ergodic_limit(spec.systems[0], source.slope, source.offset, spec.observables[0])
    value = limit.evaluate(spec.starts[0]) * _trailing_product(spec)
    return LimitPrediction(
        value,
        "linear irrational: eigenprojection series",
        modes=sorted(set(limit.matched.values())),
        truncation=limit.truncation,
        observable=limit.observable,
    )


@dataclass
class WindowOracle:
    value: complex
    normalization: str
    printed: complex
    scaled: complex
    brute_force: complex

    def to_dict(self) -> Dict[str, Any]:
        return {
            "normalization": self.normalization,
            "re": self.value.real,
            "im": self.value.imag,
            "printed": [self.printed.real, self.printed.imag],
            "scaled": [self.scaled.real, self.scaled.imag],
            "brute_force": [self.brute_force.real, self.brute_force.imag],
        }


def window_integral(gamma: Real, ell: Real, f: TrigPoly, x: float) -> complex:
    """∫ f over [x + (ℓ−1)/γ, x + ℓ/γ] in closed form."""
    g, offset = float(gamma), float(ell)
    upper = x + offset / g
    lower = x + (offset - 1.0) / g
    total = 0j
    for k, c in f.coefficients:
        if k == 0:
            total += c * (upper - lower)
        else:
            total += c * (np.exp(2j * np.pi * k * upper) - np.exp(2j * np.pi * k * lower)) / (
                2j * np.pi * k
            )
    return complex(total)


def rotation_by_inverse(gamma: Real) -> CircleRotation:
    """T x = x + 1/γ at working precision."""
    with mp.workdps(WORKING_DIGITS):
        g = gamma.as_mpf() if isinstance(gamma, HighPrecisionReal) else mp.mpf(repr(float(gamma)))
        inverse = 1 / g
        return CircleRotation(from_mpf(inverse - mp.floor(inverse), "1/gamma"))


def brute_force_average(
    gamma: Real, ell: Real, f: Observable, x: float, N: int = ORACLE_SAMPLES
) -> complex:
    """(1/N) Σ_{n<N} f(x + [γn+ℓ]/γ), summed like any other engine average."""
    iterate = IterateSequence.linear(_as_hpr(gamma), _as_hpr(ell), budget=max(N, 1))
    rotation = rotation_by_inverse(gamma)
    floors = iterate.floors(N)

    def terms(lo: int, hi: int) -> np.ndarray:
        return np.asarray(f.evaluate(rotation.apply_power(floors[lo:hi], x)), dtype=complex)

    return BlockSummer(terms).mean(N)


def sliding_window_oracle(
    gamma: Real,
    ell: Real,
    f: TrigPoly,
    x: float,
    N: int = ORACLE_SAMPLES,
    tolerance: float = ORACLE_TOLERANCE,
) -> WindowOracle:
    """Window integral under both normalizations, selected against a brute-force average."""
    printed = window_integral(gamma, ell, f, x)
    scaled = float(gamma) * printed
    brute = brute_force_average(gamma, ell, f, x, N)
    if abs(scaled - brute) <= tolerance:
        return WindowOracle(scaled, "scaled", printed, scaled, brute)
    if abs(printed - brute) <= tolerance:
        return WindowOracle(printed, "printed", printed, scaled, brute)
    raise OracleMismatch(
        f"window oracle: printed {printed:.6g} and scaled {scaled:.6g} both miss "
        f"the brute-force average {brute:.6g}"
    )


def invariance_floor(gamma: Real, ell: Real, g: TrigPoly, x: float) -> float:
    """Limit of the invariance defect along [γn+ℓ] on T x = x + 1/γ, from window integrals."""
    theta = float(rotation_by_inverse(gamma).theta)
    scale = float(gamma)
    here = scale * window_integral(gamma, ell, g, x)
    moved = scale * window_integral(gamma, ell, g, x + theta)
    return abs(here - moved)


def counterexample_floor(gamma: Real) -> float:
    """γ(1 − cos(2π/γ))/π: the defect floor for g = e₁, ℓ = 0."""
    g = float(gamma)
    return g * (1.0 - math.cos(2.0 * math.pi / g)) / math.pi


def suspension_limit(base: SystemSpec, gamma: Real, ell: Real, f: Observable, x: State) -> complex:
    """E(f̃ | I(S))({ℓ}, T^[ℓ] x) via the mean ergodic series."""
    return mean_ergodic_limit(base, gamma, ell, f).evaluate(x)


# ============================================================================
# Dispatch
# ============================================================================

def uniquely_ergodic_limit(s: SystemSpec, f: Observable) -> complex:
    if not uniquely_ergodic(s):
        raise UnsupportedSystemError(f"{s.kind} system is not uniquely ergodic")
    if not f.continuous:
        raise UnsupportedSystemError(f"{type(f).__name__} is not continuous")
    return space_average(s, f)


def predicted_limit(spec: ExperimentSpec) -> LimitPrediction:
    source = spec.iterates[0].source
    if isinstance(source, SublinearSource):
        return predicted_limit_sublinear(spec)
    if source.rational is not None:
        return predicted_limit_linear_rational(spec)
    return predicted_limit_linear_irrational(spec)
