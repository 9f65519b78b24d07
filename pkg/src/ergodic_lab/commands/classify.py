# src/ergodic_lab/commands/classify.py
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional

import typer

from ..errors import ConfigError, ExprError, OracleMismatch
from ..expr import FunctionSpec, to_text
from ..funclass import (
    ClassVerdict,
    classify,
    d0_limit_report,
    derivative_ratio_report,
    translate_ratio_bound,
)
from ..utils.cli_helpers import handle_lab_errors
from ..utils.command_base import ConfigCommand
from ..utils.config import RunConfig, parse_config
from ..utils.logging import get_logger
from ..utils.validation import ValidationError, validate_class_names

logger = get_logger(__name__)


def _witness_text(verdict: ClassVerdict) -> str:
    return ";".join(f"{float(x)!r}:{float(v)!r}" for x, v in verdict.witness)


class ClassifyCommand(ConfigCommand):
    """Place functions in the growth classes and compare with an expected table."""

    name = "classify"
    headers = ("function", "expr", "class", "verdict", "reason", "estimated_limit", "witness")

    def __init__(
        self,
        functions: Optional[List[str]] = None,
        classes: Optional[str] = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(**kwargs)
        self.function_texts = functions or []
        self.classes_option = classes
        self.classes: List[str] = []
        self.specs: List[FunctionSpec] = []

    def validate_args(self) -> None:
        if self.function_texts and self.config_path is not None:
            raise ValidationError("use either --config or --function, not both")
        if self.function_texts and self.config is None:
            data: Dict[str, Any] = {
                "command": "classify",
                "functions": [{"expr": text} for text in self.function_texts],
            }
            if self.classes_option:
                data["classes"] = validate_class_names(self.classes_option)
            self.config = parse_config(data)
        super().validate_args()

    def validate_config(self, config: RunConfig) -> None:
        if not config.functions:
            raise ConfigError("classify needs at least one function")
        self.classes = validate_class_names(self.classes_option or config.classes)
        try:
            self.specs = [f.build() for f in config.functions]
        except ExprError as exc:
            raise ConfigError(f"invalid function: {exc}") from exc
        names = [spec.name for spec in self.specs]
        if len(set(names)) != len(names):
            raise ConfigError(f"function names must be unique, got {names}")

    def execute(self) -> Dict[str, Any]:
        verdicts: Dict[str, List[ClassVerdict]] = {}
        reports: Dict[str, Dict[str, Any]] = {}
        for spec in self.specs:
            logger.debug(f"classifying {spec.name}")
            verdicts[spec.name] = classify(spec, self.classes)
            reports[spec.name] = {
                "d0_limit": d0_limit_report(spec).to_dict(),
                "translate_ratio": translate_ratio_bound(spec).to_dict(),
                "derivative_ratio": derivative_ratio_report(spec).to_dict(),
            }
        return {"verdicts": verdicts, "reports": reports}

    def format_output(self, result: Dict[str, Any]) -> None:
        rows = []
        summary = []
        for spec in self.specs:
            line: Dict[str, Any] = {"function": spec.name}
            for verdict in result["verdicts"][spec.name]:
                rows.append(
                    {
                        "function": spec.name,
                        "expr": to_text(spec.expr),
                        "class": verdict.class_name,
                        "verdict": verdict.verdict.value,
                        "reason": verdict.reason,
                        "estimated_limit": verdict.estimated_limit,
                        "witness": _witness_text(verdict),
                    }
                )
                line[verdict.class_name] = verdict.verdict.value
            summary.append(line)
        sidecar = {
            "classes": self.classes,
            "functions": {
                spec.name: {
                    "expr": to_text(spec.expr),
                    "domain_start": spec.domain_start,
                    "verdicts": [v.to_dict() for v in result["verdicts"][spec.name]],
                    "reports": result["reports"][spec.name],
                }
                for spec in self.specs
            },
            "expected": self.config.expected if self.config else {},
        }
        decisions = ["grid=10*10^(k/4)..1e12", "inverse-classes=D,M-on-a^-1"]
        self.emit(rows, sidecar, decisions, summary, ["function", *self.classes])

    def check(self, result: Dict[str, Any]) -> None:
        expected = self.config.expected_verdicts() if self.config else {}
        mismatches = []
        for name, table in expected.items():
            if name not in result["verdicts"]:
                raise ConfigError(f"expected verdicts name an unknown function '{name}'")
            got = {v.class_name: v.verdict for v in result["verdicts"][name]}
            for class_name, verdict in table.items():
                if class_name in got and got[class_name] is not verdict:
                    mismatches.append(
                        f"{name} in {class_name}: expected {verdict.value}, "
                        f"got {got[class_name].value}"
                    )
        if mismatches:
            raise OracleMismatch("classification differs from the expected table: "
                                 + "; ".join(mismatches))


@handle_lab_errors
def classify_command(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Run config (TOML, JSON or YAML)"),
    function: Optional[List[str]] = typer.Option(None, "--function", "-f", help="DSL function, repeatable"),
    classes: Optional[str] = typer.Option(None, "--classes", help="Comma-separated classes, e.g. SL,F,T"),
    format: str = typer.Option("table", "--format", help="Output format: table, json, csv, yaml"),
    out: Optional[str] = typer.Option(None, "--out", help="Output directory"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Worker threads"),
):
    """Classify functions into SL, F, R, T, S, D_k and M_k."""
    cmd = ClassifyCommand(
        functions=function,
        classes=classes,
        config_path=config,
        out=out,
        workers=workers,
        format=format,
        ctx=ctx,
    )
    cmd.run()
