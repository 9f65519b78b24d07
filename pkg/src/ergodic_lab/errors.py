# src/ergodic_lab/errors.py
from __future__ import annotations

from typing import Any


class LabError(Exception):
    """Base error for the laboratory."""

    exit_code = 1


class ExprError(LabError):
    """Problem with a function DSL expression."""


class ExprSyntaxError(ExprError):
    """Malformed DSL text."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    """Identifier that is neither x, a known function nor a named constant."""

    def __init__(self, name: str, offset: int) -> None:
        super().__init__(f"unknown identifier '{name}' at offset {offset}")
        self.name = name
        self.offset = offset


class ExprDomainError(ExprError):
    """Evaluation left the domain of a sub-expression."""

    def __init__(self, message: str, node: Any = None) -> None:
        super().__init__(message)
        self.node = node


class InverseError(LabError):
    """Numeric inversion failed."""


class NoBracketError(InverseError):
    """No sign change found before the search bound."""


class NonMonotoneError(InverseError):
    """Function is not monotone inside the bracket."""


class UnsupportedSystemError(LabError):
    """Operation has no closed form for this system or observable."""


class ConfigError(LabError):
    """Invalid run configuration."""

    exit_code = 2


class GrowthOrderError(ConfigError):
    """Iterates are not strictly ordered by growth."""


class ToleranceBreach(LabError):
    """A measured quantity missed its configured tolerance."""

    exit_code = 3


class OracleMismatch(LabError):
    """An independent oracle disagrees with a closed form or an expected verdict."""

    exit_code = 4
