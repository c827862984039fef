import logging

import pytest

from thzscatter.dsmodel import DEFAULT_CALIBRATION_DB, GeometryConfig
from thzscatter.presets import get_preset
from thzscatter.reconstruct import RoughnessLaw, Synthesizer
from thzscatter.sphgeom import HemiGrid, SpecularFrame

logging.getLogger("thzscatter").setLevel(logging.ERROR)


@pytest.fixture(scope="session")
def grid1():
    return HemiGrid(1.0)


@pytest.fixture(scope="session")
def frame45():
    return SpecularFrame(45.0)


@pytest.fixture(scope="session")
def p45():
    return get_preset("angle45")


@pytest.fixture(scope="session")
def geo45():
    return GeometryConfig(45.0)


def make_synth(name, widths="table", calibration_db=DEFAULT_CALIBRATION_DB, resolution=1.0):
    p = get_preset(name)
    return Synthesizer(
        HemiGrid(resolution),
        SpecularFrame(p.theta_i),
        p.ds,
        GeometryConfig(p.theta_i),
        RoughnessLaw(p.tls, p.gev),
        p.widths if widths == "table" else widths,
        calibration_db,
    )


@pytest.fixture(scope="session")
def synth45():
    """45 degree preset with its tabulated main-lobe widths."""
    return make_synth("angle45")


@pytest.fixture(scope="session")
def synth45_derived():
    """45 degree preset with main-lobe widths derived from the DS lobes."""
    return make_synth("angle45", widths=None)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request):
    """Record and print one ``CRITERION n: PASS|FAIL`` line."""

    def record(number, ok, detail=""):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}" + (f"  {detail}" if detail else "")
        print(line)
        request.config.stash[ACCEPTANCE_LINES].append(line)
        return ok

    return record
