"""Tests for diagnostic logging setup."""

import logging

import pytest

from chunk_artifacts.logging import LOGGER_NAME, get_logger, parse_level, progress_enabled, setup_logging

pytestmark = pytest.mark.unit


@pytest.fixture(autouse=True)
def restore_level():
    yield
    setup_logging("INFO")


def test_parse_level_is_case_insensitive():
    assert parse_level("debug") == logging.DEBUG
    assert parse_level(" Warning ") == logging.WARNING
    with pytest.raises(ValueError):
        parse_level("LOUD")


def test_setup_replaces_handlers(tmp_path):
    setup_logging("INFO")
    logger = setup_logging("DEBUG", log_file=tmp_path / "logs" / "run.log", use_rich=False)
    assert logger.name == LOGGER_NAME
    assert len(logger.handlers) == 2
    assert not logger.propagate

    get_logger("tests").debug("written to file")
    for handler in logger.handlers:
        handler.flush()
    assert "written to file" in (tmp_path / "logs" / "run.log").read_text(encoding="utf-8")


def test_progress_follows_level():
    setup_logging("INFO")
    assert progress_enabled()
    setup_logging("WARNING")
    assert not progress_enabled()
