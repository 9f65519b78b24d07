"""Named real constants resolved at high precision and split into double-double form."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Union

import mpmath as mp

from .errors import ConfigError, ExprError
from .expr import depends_on_x, evaluate_mp, parse

logger = logging.getLogger(__name__)

WORKING_DIGITS = 35

NAMED_CONSTANTS: Dict[str, Callable[[], mp.mpf]] = {
    "sqrt2": lambda: mp.sqrt(2),
    "sqrt3": lambda: mp.sqrt(3),
    "golden": lambda: (1 + mp.sqrt(5)) / 2,
    "e": lambda: +mp.e,
    "pi": lambda: +mp.pi,
}


@dataclass(frozen=True)
class HighPrecisionReal:
    """A real number as an unevaluated sum ``hi + lo`` of two doubles.

    ``hi`` is the binary64 rounding of the value and ``|lo| <= ulp(hi) / 2``.
    """

    hi: float
    lo: float = 0.0
    text: str = ""

    def __float__(self) -> float:
        return self.hi

    def frac(self) -> "HighPrecisionReal":
        """Fractional part, keeping the low word."""
        with mp.workdps(WORKING_DIGITS):
            value = mp.mpf(self.hi) + mp.mpf(self.lo)
            return from_mpf(value - mp.floor(value), self.text)

    def as_mpf(self) -> mp.mpf:
        return mp.mpf(self.hi) + mp.mpf(self.lo)


def from_mpf(value: mp.mpf, text: str = "") -> HighPrecisionReal:
    hi = float(value)
    lo = float(value - mp.mpf(hi))
    return HighPrecisionReal(hi, lo, text)


def resolve(value: Union[str, float, int]) -> HighPrecisionReal:
    """Resolve a config number: a literal, a named constant or a constant DSL expression.

    >>> resolve("sqrt2").hi
    1.4142135623730951
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        with mp.workdps(WORKING_DIGITS):
            return from_mpf(mp.mpf(repr(value)), repr(value))

    text = str(value).strip()
    with mp.workdps(WORKING_DIGITS):
        if text in NAMED_CONSTANTS:
            return from_mpf(NAMED_CONSTANTS[text](), text)

        floats = {name: float(make()) for name, make in NAMED_CONSTANTS.items()}
        try:
            tree = parse(text, constants=floats)
            if depends_on_x(tree):
                raise ConfigError(f"number {text!r} must not depend on x")
            resolved = evaluate_mp(tree, named=NAMED_CONSTANTS)
        except ExprError as exc:
            raise ConfigError(f"cannot resolve number {text!r}: {exc}") from exc
        logger.debug("resolved %s to %s", text, mp.nstr(resolved, 20))
        return from_mpf(resolved, text)
