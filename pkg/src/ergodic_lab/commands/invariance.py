# src/ergodic_lab/commands/invariance.py
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import typer

from ..engine import LinearSource, invariance_defect, invariance_shift
from ..errors import ConfigError, OracleMismatch, ToleranceBreach
from ..limits import counterexample_floor, invariance_floor
from ..systems import Observable, TrigPoly
from ..utils.cli_helpers import handle_lab_errors
from ..utils.config import RunConfig
from ..utils.logging import get_logger
from .experiment import ExperimentCommand

logger = get_logger(__name__)

FLOOR_AGREEMENT = 1e-9


def check_character_floor(floor: float, source: LinearSource, g: TrigPoly) -> bool:
    """For g = e_1 and ℓ = 0 the window floor has the closed form γ(1 − cos(2π/γ))/π."""
    if g.as_dict() != {1: 1} or source.offset.hi != 0.0 or source.offset.lo != 0.0:
        return False
    expected = counterexample_floor(source.slope)
    if abs(floor - expected) > FLOOR_AGREEMENT:
        raise OracleMismatch(
            f"window floor {floor:.12g} disagrees with the closed form {expected:.12g}"
        )
    return True


@dataclass
class DefectTrace:
    run: int
    shift: int
    checkpoints: List[int]
    defects: List[float]
    floor: Optional[float] = None


class InvarianceCommand(ExperimentCommand):
    """Invariance defect of the empirical measures under T_1^r × id × ... × id."""

    name = "invariance"
    headers = ("run", "N", "shift", "defect", "floor")

    def __init__(self, **kwargs) -> None:
        super().__init__(**kwargs)
        self.g: Optional[Observable] = None

    def validate_config(self, config: RunConfig) -> None:
        super().validate_config(config)
        if config.invariance is None:
            raise ConfigError("invariance needs an [invariance] section with a test function g")
        self.g = config.invariance.g.build()
        if config.invariance.window_floor:
            source = self.experiments[0].iterates[0].source
            if (
                self.experiments[0].d != 1
                or not isinstance(source, LinearSource)
                or not isinstance(self.g, TrigPoly)
            ):
                raise ConfigError("the window floor needs d = 1, a linear iterate and a trig g")

    def execute(self) -> List[DefectTrace]:
        assert self.config is not None and self.config.invariance is not None and self.g is not None
        r = self.config.invariance.r
        results = []
        for run, spec in enumerate(self.experiments):
            shift = invariance_shift(spec) if r is None else r
            defects = [invariance_defect(spec, N, self.g, shift, self.workers) for N in self.schedule]
            floor = None
            if self.config.invariance.window_floor:
                source = spec.iterates[0].source
                assert isinstance(source, LinearSource) and isinstance(self.g, TrigPoly)
                floor = invariance_floor(source.slope, source.offset, self.g, float(spec.starts[0]))
                self.add_decision("floor=window-integrals")
                if check_character_floor(floor, source, self.g):
                    self.add_decision("floor=closed-form-checked")
            logger.debug(f"run {run}: defects={defects} floor={floor}")
            results.append(DefectTrace(run, shift, list(self.schedule), defects, floor))
        return results

    def format_output(self, results: List[DefectTrace]) -> None:
        rows = [
            {"run": t.run, "N": N, "shift": t.shift, "defect": defect, "floor": t.floor}
            for t in results
            for N, defect in zip(t.checkpoints, t.defects)
        ]
        sidecar = {
            **self.base_sidecar(),
            "shifts": [t.shift for t in results],
            "floors": [t.floor for t in results],
        }
        summary = [row for row in rows if row["N"] == self.schedule[-1]]
        self.emit(rows, sidecar, self.decisions, summary, list(self.headers))

    def check(self, results: List[DefectTrace]) -> None:
        assert self.config is not None
        tolerance = self.config.tolerance
        for t in results:
            final = t.defects[-1]
            if tolerance.defect is not None and final > tolerance.defect:
                raise ToleranceBreach(
                    f"run {t.run}: defect {final:.3g} at N={t.checkpoints[-1]} exceeds "
                    f"{tolerance.defect}"
                )
            if tolerance.floor_fraction is not None and t.floor is not None:
                needed = tolerance.floor_fraction * t.floor
                if final <= needed:
                    raise ToleranceBreach(
                        f"run {t.run}: defect {final:.3g} does not exceed "
                        f"{tolerance.floor_fraction} x floor {t.floor:.3g}"
                    )


@handle_lab_errors
def invariance_command(
    ctx: typer.Context,
    config: Path = typer.Option(..., "--config", "-c", help="Run config (TOML, JSON or YAML)"),
    out: Optional[str] = typer.Option(None, "--out", help="Output directory"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Worker threads for block sums"),
    format: str = typer.Option("table", "--format", help="Output format: table, json, csv, yaml"),
):
    """Measure how far the empirical measures are from T_1-invariance."""
    InvarianceCommand(config_path=config, out=out, workers=workers, format=format, ctx=ctx).run()
