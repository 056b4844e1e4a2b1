import pytest

from fdcr.dettheory import SensingConfig
from fdcr.throughput import LinkModel
from fdcr.traffic import TrafficModel


@pytest.fixture
def preset_sense():
    """Sensing parameters of the default preset, midpoint threshold."""
    cfg = SensingConfig.from_db(0.235, 20.0, -15.0, None, 6e6)
    return cfg.with_gamma(cfg.midpoint_gamma)


@pytest.fixture
def preset_traffic():
    return TrafficModel(0.01, 0.5)


@pytest.fixture
def preset_link():
    return LinkModel.symmetric(15.0, 20.0, chi=0.235)


_REPORT = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_REPORT] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash[_REPORT]

    def record(criterion, ok, detail, extra=()):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        lines.append(line)
        lines.extend(f"    {row}" for row in extra)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_REPORT, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
