# src/ergodic_lab/commands/average.py
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Optional

import typer

from ..engine import AverageTrace, trace
from ..errors import ToleranceBreach
from ..limits import LimitPrediction
from ..utils.cli_helpers import handle_lab_errors
from ..utils.logging import get_logger, log_checkpoint
from .experiment import ExperimentCommand, complex_columns, safe_prediction

logger = get_logger(__name__)


@dataclass
class RunResult:
    run: int
    trace: AverageTrace
    prediction: Optional[LimitPrediction]

    def errors(self) -> List[Optional[float]]:
        if self.prediction is None:
            return [None] * len(self.trace.values)
        return [abs(v - self.prediction.value) for v in self.trace.values]


def strictly_decreasing(values: List[Optional[float]]) -> bool:
    known = [v for v in values if v is not None]
    return len(known) == len(values) and all(b < a for a, b in zip(known, known[1:]))


def check_trace_tolerances(results: List[RunResult], tolerance: Any) -> None:
    """Bound, final error and decreasing-run thresholds shared by average and sweep."""
    for result in results:
        if not result.trace.within_bound(tolerance.bound_slack):
            raise ToleranceBreach(
                f"run {result.run}: |A_N| exceeds the sup-norm bound {result.trace.bound}"
            )
    if tolerance.final is not None:
        for result in results:
            final = result.errors()[-1]
            if final is None:
                final = abs(result.trace.values[-1])
            if final > tolerance.final:
                raise ToleranceBreach(
                    f"run {result.run}: final error {final:.3g} exceeds {tolerance.final}"
                )
    if tolerance.decreasing_runs is not None:
        decreasing = sum(
            strictly_decreasing(
                r.errors() if r.prediction is not None else [abs(v) for v in r.trace.values]
            )
            for r in results
        )
        if decreasing < tolerance.decreasing_runs:
            raise ToleranceBreach(
                f"only {decreasing} of {len(results)} runs decrease across checkpoints, "
                f"need {tolerance.decreasing_runs}"
            )


def trace_rows(results: List[RunResult], extra: Optional[dict] = None) -> List[dict]:
    rows = []
    for result in results:
        errors = result.errors()
        predicted = result.prediction.value if result.prediction else None
        for N, value, error in zip(result.trace.checkpoints, result.trace.values, errors):
            rows.append(
                {
                    **(extra or {}),
                    "run": result.run,
                    "N": N,
                    **complex_columns("", value),
                    "abs": abs(value),
                    "bound": result.trace.bound,
                    **complex_columns("predicted_", predicted),
                    "error": error,
                }
            )
    return rows


TRACE_HEADERS = ("run", "N", "re", "im", "abs", "bound", "predicted_re", "predicted_im", "error")


class AverageCommand(ExperimentCommand):
    """A_N at each checkpoint for every run, against the predicted limit."""

    name = "average"
    headers = TRACE_HEADERS

    def execute(self) -> List[RunResult]:
        results = []
        for run, spec in enumerate(self.experiments):
            prediction, decision = safe_prediction(spec)
            self.add_decision(decision)
            t = trace(spec, self.schedule, self.workers)
            for N, value in zip(t.checkpoints, t.values):
                log_checkpoint(N, value)
            results.append(RunResult(run, t, prediction))
        return results

    def format_output(self, results: List[RunResult]) -> None:
        rows = trace_rows(results)
        sidecar = {
            **self.base_sidecar(),
            "predictions": [r.prediction.to_dict() if r.prediction else None for r in results],
        }
        summary = [row for row in rows if row["N"] == self.schedule[-1]]
        self.emit(rows, sidecar, self.decisions, summary, list(self.headers))

    def check(self, results: List[RunResult]) -> None:
        assert self.config is not None
        check_trace_tolerances(results, self.config.tolerance)


@handle_lab_errors
def average_command(
    ctx: typer.Context,
    config: Path = typer.Option(..., "--config", "-c", help="Run config (TOML, JSON or YAML)"),
    out: Optional[str] = typer.Option(None, "--out", help="Output directory"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Worker threads for block sums"),
    format: str = typer.Option("table", "--format", help="Output format: table, json, csv, yaml"),
):
    """Compute multiple ergodic averages along the checkpoint schedule."""
    AverageCommand(config_path=config, out=out, workers=workers, format=format, ctx=ctx).run()
