# src/ergodic_lab/commands/limit.py
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import typer

from ..engine import BlockSummer, ExperimentSpec, LinearSource, multiple_average, suspension_orbit
from ..errors import ConfigError, OracleMismatch, ToleranceBreach, UnsupportedSystemError
from ..limits import (
    LimitPrediction,
    WindowOracle,
    rotation_by_inverse,
    sliding_window_oracle,
    suspension_limit,
    uniquely_ergodic_limit,
)
from ..systems import CircleRotation, Suspension, TrigPoly, lift_observable
from ..utils.cli_helpers import handle_lab_errors
from ..utils.logging import get_logger
from .experiment import ExperimentCommand, complex_columns, safe_prediction

logger = get_logger(__name__)

ROTATION_MATCH = 1e-12


@dataclass
class SuspensionCheck:
    N: int
    termwise: float
    suspension_average: complex
    direct_average: complex
    limit: complex

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "termwise": self.termwise,
            "suspension_average": [self.suspension_average.real, self.suspension_average.imag],
            "direct_average": [self.direct_average.real, self.direct_average.imag],
            "limit": [self.limit.real, self.limit.imag],
        }


@dataclass
class LimitResult:
    run: int
    prediction: Optional[LimitPrediction]
    space_average: Optional[complex] = None
    oracle: Optional[WindowOracle] = None
    suspension: Optional[SuspensionCheck] = None
    notes: List[str] = field(default_factory=list)


def _first_linear(spec: ExperimentSpec) -> LinearSource:
    source = spec.iterates[0].source
    if not isinstance(source, LinearSource):
        raise ConfigError("this check needs a linear first iterate")
    return source


def window_oracle_applies(spec: ExperimentSpec) -> bool:
    """d = 1, irrational γn+ℓ, trig observable and T x = x + 1/γ."""
    source = spec.iterates[0].source
    if spec.d != 1 or not isinstance(source, LinearSource) or source.rational is not None:
        return False
    system = spec.systems[0]
    if not isinstance(system, CircleRotation) or not isinstance(spec.observables[0], TrigPoly):
        return False
    expected = rotation_by_inverse(source.slope).theta
    gap = abs(system.theta - expected) % 1.0
    return min(gap, 1.0 - gap) <= ROTATION_MATCH


def _stack(states: List[Any]) -> Any:
    if states and isinstance(states[0], tuple):
        return tuple(np.asarray(column) for column in zip(*states))
    return np.asarray(states)


def suspension_identity(spec: ExperimentSpec, N: int, workers: int = 1) -> SuspensionCheck:
    """Birkhoff average of f̃ on the suspension from ({ℓ}, T^[ℓ] x) against the direct average."""
    source = _first_linear(spec)
    base, f, x = spec.systems[0], spec.observables[0], spec.starts[0]
    if spec.d != 1:
        raise ConfigError("the suspension identity is checked for d = 1")
    ell = source.offset.hi
    whole = int(np.floor(ell))
    start = (ell - whole, base.apply_power(whole, x))
    ts, xs = suspension_orbit(base, source.slope, start, N)
    lifted = lift_observable(f)
    suspended = np.asarray(lifted.evaluate((ts, _stack(xs))), dtype=complex)
    direct_states = base.apply_power(spec.iterates[0].floors(N), x)
    direct = np.asarray(f.evaluate(direct_states), dtype=complex)
    termwise = float(np.max(np.abs(suspended - direct)))

    def suspended_terms(lo: int, hi: int) -> np.ndarray:
        return suspended[lo:hi]

    system = Suspension(base, source.slope)
    logger.debug(f"suspension identity on {system.describe()} termwise={termwise:.3e}")
    return SuspensionCheck(
        N=N,
        termwise=termwise,
        suspension_average=BlockSummer(suspended_terms, workers).mean(N),
        direct_average=multiple_average(spec, N, workers),
        limit=suspension_limit(base, source.slope, source.offset, f, x),
    )


class LimitCommand(ExperimentCommand):
    """Predicted limits with the oracles that cross-check them."""

    name = "limit"
    headers = (
        "run", "provenance", "predicted_re", "predicted_im", "truncation", "modes",
        "space_average_re", "space_average_im", "oracle_normalization", "oracle_re",
        "oracle_im", "brute_force_re", "brute_force_im", "closed_form_gap",
        "suspension_termwise", "suspension_error",
    )

    def execute(self) -> List[LimitResult]:
        assert self.config is not None
        options = self.config.limit
        results = []
        for run, spec in enumerate(self.experiments):
            prediction, decision = safe_prediction(spec)
            self.add_decision(decision)
            result = LimitResult(run, prediction)
            if spec.d == 1:
                try:
                    result.space_average = uniquely_ergodic_limit(
                        spec.systems[0], spec.observables[0]
                    )
                except UnsupportedSystemError as exc:
                    result.notes.append(f"space average: {exc}")
            if options.oracle and window_oracle_applies(spec):
                source = _first_linear(spec)
                result.oracle = sliding_window_oracle(
                    source.slope,
                    source.offset,
                    spec.observables[0],
                    float(spec.starts[0]),
                    N=options.samples,
                    tolerance=self.config.tolerance.oracle,
                )
                self.add_decision(f"window-normalization={result.oracle.normalization}")
            if options.suspension:
                result.suspension = suspension_identity(spec, self.schedule[-1], self.workers)
            results.append(result)
        return results

    def format_output(self, results: List[LimitResult]) -> None:
        rows = []
        for r in results:
            predicted = r.prediction.value if r.prediction else None
            gap = abs(predicted - r.oracle.value) if (r.oracle and predicted is not None) else None
            suspension_error = (
                abs(r.suspension.suspension_average - r.suspension.limit) if r.suspension else None
            )
            rows.append(
                {
                    "run": r.run,
                    "provenance": r.prediction.provenance if r.prediction else "",
                    **complex_columns("predicted_", predicted),
                    "truncation": r.prediction.truncation if r.prediction else None,
                    "modes": r.prediction.modes if r.prediction else [],
                    **complex_columns("space_average_", r.space_average),
                    "oracle_normalization": r.oracle.normalization if r.oracle else "",
                    **complex_columns("oracle_", r.oracle.value if r.oracle else None),
                    **complex_columns("brute_force_", r.oracle.brute_force if r.oracle else None),
                    "closed_form_gap": gap,
                    "suspension_termwise": r.suspension.termwise if r.suspension else None,
                    "suspension_error": suspension_error,
                }
            )
        sidecar = {
            **self.base_sidecar(),
            "predictions": [r.prediction.to_dict() if r.prediction else None for r in results],
            "oracles": [r.oracle.to_dict() if r.oracle else None for r in results],
            "suspension": [r.suspension.to_dict() if r.suspension else None for r in results],
            "notes": [r.notes for r in results],
        }
        summary_headers = ["run", "provenance", "predicted_re", "predicted_im",
                           "oracle_normalization", "closed_form_gap", "suspension_error"]
        self.emit(rows, sidecar, self.decisions, rows, summary_headers)

    def check(self, results: List[LimitResult]) -> None:
        assert self.config is not None
        tolerance = self.config.tolerance
        for r in results:
            if r.oracle is not None and r.prediction is not None:
                gap = abs(r.prediction.value - r.oracle.value)
                if gap > tolerance.closed_forms:
                    raise OracleMismatch(
                        f"run {r.run}: eigen series {r.prediction.value:.12g} and window "
                        f"oracle {r.oracle.value:.12g} differ by {gap:.3g}"
                    )
            if r.suspension is not None:
                if r.suspension.termwise > tolerance.identity:
                    raise ToleranceBreach(
                        f"run {r.run}: suspension orbit differs termwise by "
                        f"{r.suspension.termwise:.3g}"
                    )
                if tolerance.final is not None:
                    for label, value in (
                        ("suspension", r.suspension.suspension_average),
                        ("direct", r.suspension.direct_average),
                    ):
                        error = abs(value - r.suspension.limit)
                        if error > tolerance.final:
                            raise ToleranceBreach(
                                f"run {r.run}: {label} average misses the suspension limit "
                                f"by {error:.3g}"
                            )


@handle_lab_errors
def limit_command(
    ctx: typer.Context,
    config: Path = typer.Option(..., "--config", "-c", help="Run config (TOML, JSON or YAML)"),
    out: Optional[str] = typer.Option(None, "--out", help="Output directory"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Worker threads for block sums"),
    format: str = typer.Option("table", "--format", help="Output format: table, json, csv, yaml"),
):
    """Predict limits and cross-check them against the oracles."""
    LimitCommand(config_path=config, out=out, workers=workers, format=format, ctx=ctx).run()
