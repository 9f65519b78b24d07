import functools
from typing import Any, Callable

import typer

from ..errors import ConfigError, LabError
from .logging import log_error_with_context
from .validation import ValidationError


def handle_lab_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """Decorator to map lab errors onto process exit codes.

    - Preserves original function signature via functools.wraps
    - Re-raises typer.Exit unchanged so command exit codes are respected
    - ValidationError and ConfigError exit with 2
    - Other LabErrors exit with their own ``exit_code``
    - All other Exceptions are reported as unexpected and exit with 1
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except typer.Exit:
            raise
        except ValidationError as e:
            log_error_with_context(e, "invalid arguments")
            raise typer.Exit(code=ConfigError.exit_code)
        except ConfigError as e:
            log_error_with_context(e, "config")
            raise typer.Exit(code=e.exit_code)
        except LabError as e:
            log_error_with_context(e)
            raise typer.Exit(code=e.exit_code)
        except Exception as e:
            log_error_with_context(e, "unexpected error")
            raise typer.Exit(code=1)
    return wrapper
