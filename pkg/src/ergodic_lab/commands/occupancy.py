# src/ergodic_lab/commands/occupancy.py
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import typer

from ..engine import (
    IterateSequence,
    LevelProfile,
    LinearSource,
    OccupancyTable,
    TermDecomposition,
    hits_linear_floor,
    level_profile,
    occupancy,
    term_decomposition,
)
from ..errors import ConfigError, ExprError, ToleranceBreach
from ..utils.cli_helpers import handle_lab_errors
from ..utils.command_base import ConfigCommand
from ..utils.config import RunConfig, build_iterates
from ..utils.logging import get_logger

logger = get_logger(__name__)

SAMPLED_BOXES = 64
HIT_WINDOW = 2048


@dataclass
class OccupancyRow:
    N: int
    table: OccupancyTable
    terms: TermDecomposition
    profile: Optional[LevelProfile]
    count_mismatches: Optional[int]
    hit_mismatches: Optional[int]

    def as_row(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "boxes": len(self.table.counts),
            "total": self.table.total,
            "shared": self.terms.shared,
            "appears": self.terms.appears,
            "disappears": self.terms.disappears,
            "sup_ratio": self.profile.sup_ratio if self.profile else None,
            "almost_increasing": self.profile.almost_increasing if self.profile else None,
            "count_mismatches": self.count_mismatches,
            "hit_mismatches": self.hit_mismatches,
        }


def count_mismatches(table: OccupancyTable, samples: int = SAMPLED_BOXES) -> Optional[int]:
    """Compare sampled interior marginal counts with the inverse-function prediction."""
    iterate = table.iterates[0]
    if isinstance(iterate.source, LinearSource) and iterate.source.slope.hi < 1.0:
        return None
    marginal = table.marginal(0)
    levels = sorted(marginal)
    if len(levels) < 3:
        return 0
    interior = levels[1:-1]
    step = max(1, len(interior) // samples)
    mismatches = 0
    for b in interior[::step]:
        if table.predicted_count(0, b) != marginal[b]:
            mismatches += 1
    return mismatches


def hit_mismatches(iterate: IterateSequence, N: int, window: int = HIT_WINDOW) -> Optional[int]:
    """Disagreements between the floors hit by [γn+ℓ] and the closed-form membership test."""
    source = iterate.source
    if not isinstance(source, LinearSource):
        return None
    floors = iterate.floors(N)
    hit = set(int(v) for v in floors)
    start = int(floors[0])
    stop = min(int(floors[-1]), start + window)
    return sum(
        (m in hit) != hits_linear_floor(source.slope, source.offset, m)
        for m in range(start, stop)
    )


class OccupancyCommand(ConfigCommand):
    """Occupancy counts of floor vectors, their three-term decomposition and level profiles."""

    name = "occupancy"
    headers = (
        "N", "boxes", "total", "shared", "appears", "disappears", "sup_ratio",
        "almost_increasing", "count_mismatches", "hit_mismatches",
    )

    def __init__(self, **kwargs: Any) -> None:
        super().__init__(**kwargs)
        self.iterates: List[IterateSequence] = []
        self.schedule: List[int] = []

    def validate_config(self, config: RunConfig) -> None:
        if not config.iterates:
            raise ConfigError("occupancy needs at least one iterate")
        self.schedule = config.schedule.resolve(self.budget)
        try:
            self.iterates = build_iterates(config, self.budget)
        except ExprError as exc:
            raise ConfigError(f"invalid iterate: {exc}") from exc

    def execute(self) -> List[OccupancyRow]:
        rows = []
        d = len(self.iterates)
        for N in self.schedule:
            table = occupancy(self.iterates, N)
            terms = term_decomposition(self.iterates, N)
            profile = level_profile(self.iterates[0], N) if d == 1 else None
            rows.append(
                OccupancyRow(
                    N=N,
                    table=table,
                    terms=terms,
                    profile=profile,
                    count_mismatches=count_mismatches(table) if d == 1 else None,
                    hit_mismatches=hit_mismatches(self.iterates[0], N) if d == 1 else None,
                )
            )
            logger.debug(f"N={N} boxes={len(table.counts)} terms={terms.as_tuple()}")
        return rows

    def format_output(self, results: List[OccupancyRow]) -> None:
        rows = [r.as_row() for r in results]
        largest = results[-1].table
        order = np.argsort(-largest.counts, kind="stable")[:16]
        sidecar = {
            "schedule": list(self.schedule),
            "iterates": [it.name for it in self.iterates],
            "largest_boxes": [
                {"box": [int(v) for v in largest.boxes[i]], "count": int(largest.counts[i])}
                for i in order
            ],
        }
        decisions = ["times=n>=0", "boxes=floor-vectors"]
        self.emit(rows, sidecar, decisions)

    def check(self, results: List[OccupancyRow]) -> None:
        assert self.config is not None
        for r in results:
            if r.table.total != r.N:
                raise ToleranceBreach(f"occupancy counts sum to {r.table.total}, expected {r.N}")
            if r.hit_mismatches:
                raise ToleranceBreach(
                    f"N={r.N}: {r.hit_mismatches} floors disagree with the hit-set test"
                )
        if self.config.tolerance.shrinking and len(results) > 1:
            first, last = results[0].terms.as_tuple(), results[-1].terms.as_tuple()
            for label, a, b in zip(("shared", "appears", "disappears"), first, last):
                if not b < a or math.isnan(b):
                    raise ToleranceBreach(
                        f"{label} term did not shrink: {a:.3g} at N={results[0].N}, "
                        f"{b:.3g} at N={results[-1].N}"
                    )


@handle_lab_errors
def occupancy_command(
    ctx: typer.Context,
    config: Path = typer.Option(..., "--config", "-c", help="Run config (TOML, JSON or YAML)"),
    out: Optional[str] = typer.Option(None, "--out", help="Output directory"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Worker threads"),
    format: str = typer.Option("table", "--format", help="Output format: table, json, csv, yaml"),
):
    """Count floor vectors and decompose the invariance terms."""
    OccupancyCommand(config_path=config, out=out, workers=workers, format=format, ctx=ctx).run()
