"""
Tests for the typer-backed logging setup and output_message routing.
"""

import logging

import pytest

from ergodic_lab.utils.logging import TyperHandler, output_message, setup_logging

pytestmark = pytest.mark.unit


@pytest.fixture(autouse=True)
def default_logging():
    yield
    setup_logging()


def test_plain_format_by_default(capsys):
    logger = setup_logging()
    logger.info("checkpoint N=64")
    assert capsys.readouterr().out == "checkpoint N=64\n"


def test_verbose_records_carry_level_and_function(capsys):
    logger = setup_logging(verbose=True)
    logger.debug("bracket expanded")
    out = capsys.readouterr().out
    assert "DEBUG" in out
    assert "test_verbose_records_carry_level_and_function" in out


def test_warnings_go_to_stderr(capsys):
    setup_logging().warning("tolerance close to the limit")
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "tolerance close" in captured.err


def test_setup_replaces_the_handler():
    setup_logging()
    logger = setup_logging(quiet=True)
    assert len(logger.handlers) == 1
    assert isinstance(logger.handlers[0], TyperHandler)
    assert logger.handlers[0].level == logging.ERROR


def test_quiet_drops_status_lines_but_not_errors(capsys):
    setup_logging(quiet=True)
    output_message("wrote results/run.json")
    output_message("oracle mismatch", level="error")
    captured = capsys.readouterr()
    assert captured.out == ""
    assert captured.err == "oracle mismatch\n"
