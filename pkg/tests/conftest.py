"""
Pytest configuration and shared fixtures for ergodic-lab tests.

This file provides:
- CLI test runner fixture
- Settings isolation (no user config file, no EAL_* variables)
- Config file writers for TOML, JSON and YAML run configs
- Small experiment builders shared by the engine and limits tests
"""

import json
import textwrap
from pathlib import Path
from typing import Callable

import pytest
import yaml
from typer.testing import CliRunner

from ergodic_lab.constants import resolve
from ergodic_lab.engine import ExperimentSpec, IterateSequence
from ergodic_lab.expr import FunctionSpec
from ergodic_lab.systems import CircleRotation, TrigPoly
from ergodic_lab.utils import config as config_module


# ============================================================================
# CLI & Runner Fixtures
# ============================================================================

@pytest.fixture
def runner():
    """Provides a Typer CLI test runner."""
    return CliRunner()


# ============================================================================
# Settings Isolation
# ============================================================================

@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Point the settings file at an empty location and clear EAL_* variables."""
    monkeypatch.setattr(config_module, "CONFIG_FILE", tmp_path / "no-such-config.json")
    for name in ("EAL_WORKERS", "EAL_BUDGET", "EAL_OUT_DIR", "EAL_VERBOSE", "EAL_QUIET"):
        monkeypatch.delenv(name, raising=False)


# ============================================================================
# Run Config Writers
# ============================================================================

@pytest.fixture
def write_toml(tmp_path) -> Callable[..., Path]:
    """Write dedented TOML text to tmp_path and return the path."""
    def _write(text: str, name: str = "run.toml") -> Path:
        path = tmp_path / name
        path.write_text(textwrap.dedent(text).lstrip(), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def write_json(tmp_path) -> Callable[..., Path]:
    def _write(data: dict, name: str = "run.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def write_yaml(tmp_path) -> Callable[..., Path]:
    def _write(data: dict, name: str = "run.yaml") -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def average_toml() -> str:
    """A small two-iterate average run on irrational rotations."""
    return """
    command = "average"
    name = "small"
    seed = 7
    runs = 2
    budget = 20000

    [[systems]]
    type = "rotation"
    angle = "sqrt2"

    [[systems]]
    type = "rotation"
    angle = "sqrt3"

    [[observables]]
    type = "trig"
    coefficients = { "1" = 1.0 }

    [[observables]]
    type = "trig"
    coefficients = { "1" = 1.0 }

    [[iterates]]
    type = "sublinear"
    expr = "x^0.9"

    [[iterates]]
    type = "sublinear"
    expr = "x^0.5"

    [schedule]
    checkpoints = [1000, 5000, 20000]
    """


# ============================================================================
# Experiment Builders
# ============================================================================

@pytest.fixture
def rotation_experiment() -> Callable[..., ExperimentSpec]:
    """d = 1 experiment: rotation by ``angle`` along [x^c], f = e_1."""
    def _build(angle: str = "sqrt2", c: float = 0.9, start: float = 0.25,
               budget: int = 50_000) -> ExperimentSpec:
        iterate = IterateSequence.sublinear(FunctionSpec.from_text(f"x^{c!r}"), budget)
        return ExperimentSpec(
            systems=[CircleRotation.from_angle(angle)],
            observables=[TrigPoly.mode(1)],
            iterates=[iterate],
            starts=[start],
        )

    return _build


@pytest.fixture
def linear_experiment() -> Callable[..., ExperimentSpec]:
    """d = 1 experiment on T x = x + theta along [gamma n + ell]."""
    def _build(gamma: str, ell: str, rotation: CircleRotation, f: TrigPoly,
               start: float, budget: int = 200_000) -> ExperimentSpec:
        iterate = IterateSequence.linear(resolve(gamma), resolve(ell), budget)
        return ExperimentSpec(
            systems=[rotation], observables=[f], iterates=[iterate], starts=[start]
        )

    return _build


# ============================================================================
# Pytest Configuration
# ============================================================================

def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "unit: mark test as a unit test"
    )
    config.addinivalue_line(
        "markers", "integration: mark test as an integration test"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )
    config.addinivalue_line(
        "markers", "acceptance: desk-scale acceptance experiment"
    )
