import json
from pathlib import Path

import pytest

from conic_entropy import ConeModel, build_mesh, make_round_sphere_cross_section

ROOT = Path(__file__).resolve().parents[1]
EXPECTED = json.loads((Path(__file__).parent / "oracles" / "expected.json").read_text())


def cone(n, a=1.0, **kw):
    return ConeModel(n, make_round_sphere_cross_section(n, a), **kw)


@pytest.fixture(scope="session")
def expected():
    return EXPECTED


@pytest.fixture(scope="session")
def flat3():
    return cone(3)


@pytest.fixture(scope="session")
def mesh256():
    return build_mesh(1.0, 256)


@pytest.fixture(scope="session")
def sub4():
    """n = 4 over a sphere of radius 0.8: R_h0 = 9.375 > n - 2."""
    return cone(4, 0.8)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
