# src/ergodic_lab/utils/command_base.py
from __future__ import annotations

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import typer

from ..errors import ConfigError
from .config import RunConfig, Settings, config_hash, load_config, load_settings
from .logging import log_run_start, output_message
from .output import OutputFormat, OutputFormatter, write_run_outputs
from .validation import ValidationError, validate_workers


class BaseCommand(ABC):
    """
    Abstract base class for CLI commands to ensure consistent structure.

    Commands should implement:
    - validate_args(): Validate input arguments and options
    - execute(): Perform the main command logic and return data
    - format_output(): Write artifacts and display the results
    """

    def __init__(self, **kwargs: Any) -> None:
        pass

    @abstractmethod
    def validate_args(self) -> None:
        """Validate command arguments and options."""

    @abstractmethod
    def execute(self) -> Any:
        """Execute the main command logic and return results."""

    @abstractmethod
    def format_output(self, result: Any) -> None:
        """Format and output the command results."""

    def check(self, result: Any) -> None:
        """Raise a LabError for tolerance or oracle failures; runs after output."""

    def run(self) -> None:
        """Run the complete command lifecycle."""
        self.validate_args()
        result = self.execute()
        self.format_output(result)
        self.check(result)


class TyperCommand(BaseCommand):
    """
    Base class for commands that use Typer for argument parsing.
    """

    def __init__(self, ctx: Optional[typer.Context] = None, **kwargs: Any) -> None:
        super().__init__(**kwargs)
        self.ctx = ctx


class ConfigCommand(TyperCommand):
    """
    A command driven by a run config.

    Resolves settings (flags over EAL_* variables over the settings file),
    hashes the validated config and writes the CSV and JSON artifacts.
    """

    name: str = ""
    headers: Sequence[str] = ()

    def __init__(
        self,
        config_path: Optional[Path] = None,
        out: Optional[str] = None,
        workers: Optional[int] = None,
        format: str = "table",
        config: Optional[RunConfig] = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(**kwargs)
        self.config_path = config_path
        self.out = out
        self.workers_flag = workers
        self.format = format
        self.config: Optional[RunConfig] = config
        self.settings: Settings = Settings()
        self.workers = 1
        self.budget = 0
        self.out_dir = ""
        self.config_hash = ""

    def validate_args(self) -> None:
        if self.format not in [f.value for f in OutputFormat]:
            raise ValidationError(f"unsupported format '{self.format}'")
        self.settings = load_settings()
        if self.config is None:
            if self.config_path is None:
                raise ValidationError(f"'{self.name}' needs --config")
            self.config = load_config(self.config_path)
        if self.config.command not in (None, self.name):
            raise ConfigError(
                f"config is for '{self.config.command}' but '{self.name}' was invoked"
            )
        for workers in (self.workers_flag, self.config.workers, self.settings.workers):
            if workers is not None:
                self.workers = validate_workers(workers)
                break
        self.budget = self.config.budget or self.settings.budget
        self.out_dir = self.out or self.config.out or self.settings.out_dir
        self.config_hash = config_hash(self.config)
        log_run_start(self.name, self.config_hash, workers=self.workers, budget=self.budget)
        self.validate_config(self.config)

    def validate_config(self, config: RunConfig) -> None:
        """Command-specific checks on the loaded config."""

    def emit(
        self,
        rows: Sequence[Mapping[str, Any]],
        sidecar: Mapping[str, Any],
        decisions: Sequence[str],
        summary: Optional[Sequence[Mapping[str, Any]]] = None,
        summary_headers: Optional[Sequence[str]] = None,
    ) -> None:
        paths = write_run_outputs(
            self.out_dir, self.name, self.headers, rows, sidecar, self.config_hash, decisions
        )
        shown = list(summary) if summary is not None else list(rows)
        headers = list(summary_headers or (self.headers if summary is None else ()))
        OutputFormatter(self.format).output(shown, headers=headers or None)
        if self.format == OutputFormat.TABLE.value:
            output_message(f"wrote {paths['csv']} and {paths['json']}")
