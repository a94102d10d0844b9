import os
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = ROOT / "configs"


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="also run the multi-minute reproduction checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow") or os.environ.get("LINFLOW_RUN_SLOW"):
        return
    skip = pytest.mark.skip(reason="slow; pass --run-slow or set LINFLOW_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def config_dir():
    return CONFIG_DIR


_verdicts = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or report.failed:
        _verdicts[props["criterion"]] = ("PASS" if report.passed else "FAIL", props["detail"])


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        status, detail = _verdicts[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status} | {detail}")
