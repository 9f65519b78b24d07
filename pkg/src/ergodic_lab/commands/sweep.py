# src/ergodic_lab/commands/sweep.py
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, List, Optional, Tuple

import typer

from ..constants import resolve
from ..engine import ExperimentSpec, IterateSequence, trace
from ..errors import ConfigError, ExprError
from ..expr import FunctionSpec
from ..limits import rotation_by_inverse
from ..utils.cli_helpers import handle_lab_errors
from ..utils.config import RunConfig, build_iterates
from ..utils.logging import get_logger
from ..utils.validation import validate_exponents
from .average import TRACE_HEADERS, RunResult, check_trace_tolerances, trace_rows
from .experiment import ExperimentCommand, safe_prediction

logger = get_logger(__name__)


@dataclass
class Cell:
    index: int
    label: str
    experiments: List[ExperimentSpec]


@dataclass
class CellResult:
    cell: Cell
    runs: List[RunResult]


def _exponent_label(exponents: List[float]) -> str:
    return "c=" + ",".join(repr(c) for c in exponents)


class SweepCommand(ExperimentCommand):
    """A grid of experiments over exponent vectors or (γ, ℓ) pairs, one row block per cell."""

    name = "sweep"
    headers = ("cell", "params") + TRACE_HEADERS

    def __init__(self, **kwargs: Any) -> None:
        super().__init__(**kwargs)
        self.cells: List[Cell] = []

    def validate_config(self, config: RunConfig) -> None:
        if config.sweep is None:
            raise ConfigError("sweep needs a [sweep] section")
        config.require_experiment(self.name)
        self.schedule = config.schedule.resolve(self.budget)
        try:
            base = self.build(config)
            for index, params in enumerate(config.sweep.cells):
                self.cells.append(self._cell(config, base, index, params))
        except ExprError as exc:
            raise ConfigError(f"invalid sweep cell: {exc}") from exc
        self.experiments = base
        self.decisions = list(base[0].decisions)
        self.add_decision(f"sweep-cells={'exponents' if config.sweep.exponents else 'gamma_ell'}")

    def _cell(
        self, config: RunConfig, base: List[ExperimentSpec], index: int, params: Tuple[Any, ...]
    ) -> Cell:
        assert config.sweep is not None
        if config.sweep.exponents:
            exponents = validate_exponents([resolve(c).hi for c in params])
            if len(exponents) != config.d:
                raise ConfigError(
                    f"cell {index} has {len(exponents)} exponents for {config.d} iterates"
                )
            iterates = [
                IterateSequence.sublinear(
                    FunctionSpec.from_text(f"x^{c!r}", name=f"n^{c!r}"), self.budget
                )
                for c in exponents
            ]
            label = _exponent_label(exponents)
            experiments = [replace(spec, iterates=iterates) for spec in base]
            experiments[0].validate_growth_order()
            return Cell(index, label, experiments)

        gamma, ell = resolve(params[0]), resolve(params[1])
        if not gamma.hi > 0:
            raise ConfigError(f"cell {index}: gamma must be positive, got {gamma.hi}")
        first = IterateSequence.linear(gamma, ell, self.budget)
        iterates = [first] + build_iterates(config, self.budget)[1:]
        experiments = []
        for spec in base:
            systems = list(spec.systems)
            if config.sweep.rotation_by_inverse:
                systems[0] = rotation_by_inverse(gamma)
            experiments.append(replace(spec, systems=systems, iterates=iterates))
        label = f"gamma={gamma.text or repr(gamma.hi)},ell={ell.text or repr(ell.hi)}"
        return Cell(index, label, experiments)

    def _run_cell(self, cell: Cell) -> CellResult:
        runs = []
        for run, spec in enumerate(cell.experiments):
            prediction, _ = safe_prediction(spec)
            runs.append(RunResult(run, trace(spec, self.schedule, 1), prediction))
        logger.debug(f"cell {cell.index} ({cell.label}) done")
        return CellResult(cell, runs)

    def execute(self) -> List[CellResult]:
        for cell in self.cells:
            for spec in cell.experiments:
                self.add_decision(safe_prediction(spec)[1])
        if self.workers == 1:
            return [self._run_cell(cell) for cell in self.cells]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(self._run_cell, self.cells))

    def format_output(self, results: List[CellResult]) -> None:
        rows = []
        for result in results:
            rows.extend(
                trace_rows(result.runs, {"cell": result.cell.index, "params": result.cell.label})
            )
        sidecar = {
            **self.base_sidecar(),
            "cells": [
                {
                    "cell": r.cell.index,
                    "params": r.cell.label,
                    "iterates": [it.name for it in r.cell.experiments[0].iterates],
                    "predictions": [
                        run.prediction.to_dict() if run.prediction else None for run in r.runs
                    ],
                }
                for r in results
            ],
        }
        summary = [row for row in rows if row["N"] == self.schedule[-1]]
        self.emit(rows, sidecar, self.decisions, summary, list(self.headers))

    def check(self, results: List[CellResult]) -> None:
        assert self.config is not None
        for result in results:
            check_trace_tolerances(result.runs, self.config.tolerance)


@handle_lab_errors
def sweep_command(
    ctx: typer.Context,
    config: Path = typer.Option(..., "--config", "-c", help="Run config (TOML, JSON or YAML)"),
    out: Optional[str] = typer.Option(None, "--out", help="Output directory"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Cells run concurrently"),
    format: str = typer.Option("table", "--format", help="Output format: table, json, csv, yaml"),
):
    """Run a grid of experiments and emit one block of rows per cell."""
    SweepCommand(config_path=config, out=out, workers=workers, format=format, ctx=ctx).run()
