import sys

import numpy as np
import pytest
import yaml

from gferasure.config import parse_config, preset_dict


def preset_config(name: str, experiment: str = "budget", block: dict | None = None):
    text = yaml.safe_dump({"experiment": experiment, "seed": 1, "preset": name, experiment: block or {}})
    return parse_config(text)


@pytest.fixture(scope="session")
def cooldown_b():
    return preset_config("cooldown-B")


@pytest.fixture(scope="session")
def cooldown_a():
    return preset_config("cooldown-A")


@pytest.fixture(scope="session")
def paper_s5():
    return preset_config("paper-S5")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.LINES:
        terminalreporter.write_line(line)
