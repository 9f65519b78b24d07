# src/ergodic_lab/utils/validation.py
from typing import Iterable, List, Optional, Sequence, Union

from ..funclass import CLASS_NAMES


class ValidationError(Exception):
    """Raised when input validation fails."""
    pass


def validate_positive_integer(value: Union[str, int], field_name: str = "value") -> int:
    """
    Validate a positive integer.

    Args:
        value: Integer or string representation
        field_name: Name of the field for error messages

    Returns:
        Validated integer

    Raises:
        ValidationError: If value is not a positive integer
    """
    if isinstance(value, bool):
        raise ValidationError(f"{field_name} must be a valid integer, got '{value}'")
    try:
        int_value = int(value)
    except (ValueError, TypeError):
        raise ValidationError(f"{field_name} must be a valid integer, got '{value}'")
    if isinstance(value, float) and value != int_value:
        raise ValidationError(f"{field_name} must be a whole number, got {value}")
    if int_value <= 0:
        raise ValidationError(f"{field_name} must be positive, got {int_value}")
    return int_value


def validate_workers(workers: Union[str, int, None], default: int = 1) -> int:
    """Worker count for block sums and sweep cells (1 to 256)."""
    if workers is None:
        return default
    count = validate_positive_integer(workers, "workers")
    if count > 256:
        raise ValidationError(f"workers cannot exceed 256, got {count}")
    return count


def validate_schedule(checkpoints: Sequence[int], budget: Optional[int] = None) -> List[int]:
    """
    Validate a checkpoint schedule.

    Checkpoints must be positive and strictly increasing, and the last one must
    fit in the iterate budget when one is given.

    Raises:
        ValidationError: If the schedule is empty, unordered or over budget
    """
    if not checkpoints:
        raise ValidationError("checkpoint schedule cannot be empty")
    values = [validate_positive_integer(n, "checkpoint") for n in checkpoints]
    for a, b in zip(values, values[1:]):
        if b <= a:
            raise ValidationError(f"checkpoints must be strictly increasing, got {a} then {b}")
    if budget is not None and values[-1] > budget:
        raise ValidationError(f"last checkpoint {values[-1]} exceeds the budget {budget}")
    return values


def validate_exponents(exponents: Sequence[float]) -> List[float]:
    """Exponents c_1 > c_2 > ... > c_d inside (0, 1), for iterates n^c."""
    if not exponents:
        raise ValidationError("exponent list cannot be empty")
    values = []
    for c in exponents:
        try:
            value = float(c)
        except (TypeError, ValueError):
            raise ValidationError(f"exponent must be a number, got '{c}'")
        if not 0.0 < value < 1.0:
            raise ValidationError(f"exponent must lie in (0, 1), got {value}")
        values.append(value)
    for a, b in zip(values, values[1:]):
        if b >= a:
            raise ValidationError(f"exponents must be strictly decreasing, got {a} then {b}")
    return values


def validate_class_names(classes: Union[str, Iterable[str], None]) -> List[str]:
    """
    Validate class names for classify.

    Accepts a comma-separated string or a list. Unknown names raise; the order
    given is kept and duplicates are dropped.
    """
    if classes is None:
        return list(CLASS_NAMES)
    if isinstance(classes, str):
        items = [c.strip() for c in classes.split(",") if c.strip()]
    else:
        items = [str(c).strip() for c in classes]
    if not items:
        raise ValidationError("class list cannot be empty")
    unknown = [c for c in items if c not in CLASS_NAMES]
    if unknown:
        raise ValidationError(
            f"unknown class name(s): {', '.join(unknown)}. "
            f"Known classes: {', '.join(CLASS_NAMES)}"
        )
    return list(dict.fromkeys(items))
