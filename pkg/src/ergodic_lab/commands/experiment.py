# src/ergodic_lab/commands/experiment.py
"""Shared plumbing for the commands that run ExperimentSpecs."""
from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple

from ..engine import ExperimentSpec, IterateSequence
from ..errors import ConfigError, ExprError, UnsupportedSystemError
from ..limits import LimitPrediction, predicted_limit
from ..utils.command_base import ConfigCommand
from ..utils.config import RunConfig, build_experiments
from ..utils.logging import get_logger
from ..utils.output import to_plain

logger = get_logger(__name__)


def safe_prediction(spec: ExperimentSpec) -> Tuple[Optional[LimitPrediction], str]:
    """The predicted limit, or None with the reason recorded as a decision."""
    try:
        prediction = predicted_limit(spec)
    except UnsupportedSystemError as exc:
        logger.debug(f"no closed-form limit: {exc}")
        return None, "prediction=unavailable"
    return prediction, f"prediction={prediction.provenance.split(':')[0]}"


def complex_columns(prefix: str, value: Optional[complex]) -> Dict[str, Optional[float]]:
    if value is None:
        return {f"{prefix}re": None, f"{prefix}im": None}
    return {f"{prefix}re": float(value.real), f"{prefix}im": float(value.imag)}


class ExperimentCommand(ConfigCommand):
    """A config command that builds one ExperimentSpec per run."""

    def __init__(self, **kwargs: Any) -> None:
        super().__init__(**kwargs)
        self.experiments: List[ExperimentSpec] = []
        self.schedule: List[int] = []
        self.decisions: List[str] = []

    def validate_config(self, config: RunConfig) -> None:
        config.require_experiment(self.name)
        self.schedule = config.schedule.resolve(self.budget)
        try:
            self.experiments = self.build(config)
        except ExprError as exc:
            raise ConfigError(f"invalid iterate: {exc}") from exc
        self.decisions = list(self.experiments[0].decisions)

    def build(
        self, config: RunConfig, iterates: Optional[List[IterateSequence]] = None
    ) -> List[ExperimentSpec]:
        return build_experiments(config, self.budget, iterates)

    def add_decision(self, decision: str) -> None:
        if decision not in self.decisions:
            self.decisions.append(decision)

    def base_sidecar(self) -> Dict[str, Any]:
        return {
            "seed": self.config.seed if self.config else None,
            "runs": len(self.experiments),
            "schedule": list(self.schedule),
            "iterates": [it.name for it in self.experiments[0].iterates],
            "systems": [s.describe() for s in self.experiments[0].systems],
            "starts": [to_plain(spec.starts) for spec in self.experiments],
        }
