import json
from dataclasses import replace
from pathlib import Path

import pytest

from fasemcom.runner import load_config, prepare
from fasemcom.scene import fixture_dir

ORACLE_JSON = Path(__file__).parent / "fixtures" / "keyword_oracle.json"
_acceptance_lines = []


@pytest.fixture(scope="session")
def fixture_path():
    return fixture_dir()


@pytest.fixture(scope="session")
def fixture_cfg():
    return load_config("@fixture")


@pytest.fixture(scope="session")
def prepared(fixture_cfg):
    return prepare(replace(fixture_cfg, trials=32))


@pytest.fixture(scope="session")
def keyword_oracle():
    return json.loads(ORACLE_JSON.read_text())


@pytest.fixture
def report_criterion():
    """Record a PASS/FAIL line for an acceptance criterion."""
    def record(tag, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {tag}  {detail}".rstrip()
        _acceptance_lines.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
