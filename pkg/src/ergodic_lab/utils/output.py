"""
Output formatting utilities for CLI commands.
Supports multiple output formats: table, json, csv, yaml.

Run artifacts are written by :func:`write_run_outputs`: a CSV whose rows end with
``config_hash``, ``version`` and ``decisions``, and a JSON sidecar. Neither carries
timestamps, so identical configs produce identical bytes.
"""

import csv
import io
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import yaml
from tabulate import tabulate

from .. import __version__
from .files import atomic_write_text

TRAILING_COLUMNS = ("config_hash", "version", "decisions")


class OutputFormat(str, Enum):
    """Supported output formats."""
    TABLE = "table"
    JSON = "json"
    CSV = "csv"
    YAML = "yaml"


def to_plain(value: Any) -> Any:
    """Convert numpy scalars, complex numbers and tuples into JSON-friendly values."""
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Mapping):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return to_plain(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return repr(float(value))
    return value


def format_cell(value: Any) -> str:
    """Deterministic text for one CSV cell; floats use repr."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ";".join(format_cell(v) for v in value)
    if hasattr(value, "item") and callable(value.item):
        return format_cell(value.item())
    return str(value)


class OutputFormatter:
    """
    Unified output formatter supporting multiple formats.

    Usage:
        formatter = OutputFormatter(format="csv", output_file="average.csv")
        formatter.output(rows, headers=["N", "re", "im"])
    """

    def __init__(
        self,
        format: Union[str, OutputFormat] = OutputFormat.TABLE,
        output_file: Optional[str] = None,
    ):
        if isinstance(format, str):
            try:
                self.format = OutputFormat(format.lower())
            except ValueError:
                raise ValueError(
                    f"Unsupported format: {format}. "
                    f"Supported formats: {', '.join([f.value for f in OutputFormat])}"
                )
        else:
            self.format = format

        self.output_file = output_file

    def output(
        self,
        data: Union[Dict, List[Dict], List],
        headers: Optional[List[str]] = None,
    ) -> str:
        """
        Format and output data.

        Args:
            data: Data to format (dict, list of dicts, or list)
            headers: Column headers (used by table and csv formats)

        Returns:
            Formatted output as string
        """
        if self.format == OutputFormat.JSON:
            result = self._format_json(data)
        elif self.format == OutputFormat.CSV:
            result = self._format_csv(data, headers)
        elif self.format == OutputFormat.YAML:
            result = self._format_yaml(data)
        else:
            result = self._format_table(data, headers)

        if self.output_file:
            atomic_write_text(self.output_file, result)
        else:
            print(result, end="")

        return result

    @staticmethod
    def _format_json(data: Any) -> str:
        return json.dumps(to_plain(data), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def _format_table(data: Union[List[Dict], List, Dict], headers: Optional[List[str]] = None) -> str:
        """Format data as table using tabulate."""
        if isinstance(data, dict):
            data = [data]

        if data and isinstance(data[0], dict):
            if not headers:
                headers = list(data[0].keys()) if data else []
            rows = [[_table_cell(item.get(h, "")) for h in headers] for item in data]
            return tabulate(rows, headers=headers) + "\n"
        return tabulate(data, headers=headers or ()) + "\n"

    @staticmethod
    def _format_csv(data: Union[List[Dict], List, Dict], headers: Optional[List[str]] = None) -> str:
        output = io.StringIO()

        if isinstance(data, dict):
            data = [data]

        if data and isinstance(data[0], dict):
            if not headers:
                headers = list(data[0].keys()) if data else []
            writer = csv.writer(output, lineterminator="\n")
            writer.writerow(headers)
            for row in data:
                writer.writerow([format_cell(row.get(h)) for h in headers])
        else:
            writer = csv.writer(output, lineterminator="\n")
            if headers:
                writer.writerow(headers)
            writer.writerows([[format_cell(v) for v in row] for row in data])

        return output.getvalue()

    @staticmethod
    def _format_yaml(data: Any) -> str:
        return yaml.safe_dump(to_plain(data), default_flow_style=False, sort_keys=False)


def _table_cell(value: Any) -> Any:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return ", ".join(str(_table_cell(v)) for v in value)
    return value


def run_rows(
    rows: Sequence[Mapping[str, Any]],
    config_hash: str,
    decisions: Sequence[str],
) -> List[Dict[str, Any]]:
    """Append the provenance columns to every row."""
    joined = ";".join(decisions)
    return [
        {**row, "config_hash": config_hash, "version": __version__, "decisions": joined}
        for row in rows
    ]


def write_run_outputs(
    out_dir: Union[str, Path],
    command: str,
    headers: Sequence[str],
    rows: Sequence[Mapping[str, Any]],
    sidecar: Mapping[str, Any],
    config_hash: str,
    decisions: Sequence[str],
) -> Dict[str, Path]:
    """Write ``<out>/<command>.csv`` and ``<out>/<command>.json`` atomically."""
    out = Path(out_dir)
    columns = list(headers) + list(TRAILING_COLUMNS)
    csv_text = OutputFormatter._format_csv(run_rows(rows, config_hash, decisions), columns)
    meta = {
        "command": command,
        "config_hash": config_hash,
        "version": __version__,
        "decisions": list(decisions),
        "columns": columns,
        **sidecar,
    }
    json_text = OutputFormatter._format_json(meta)
    paths = {"csv": out / f"{command}.csv", "json": out / f"{command}.json"}
    atomic_write_text(paths["csv"], csv_text)
    atomic_write_text(paths["json"], json_text)
    return paths
