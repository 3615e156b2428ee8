import pytest

from zlab.maps import MapParams
from zlab.net import NetConfig, build_net


@pytest.fixture(scope="session")
def params():
    return MapParams()


@pytest.fixture(scope="session")
def net_half():
    """beta = 0.5 (rho = 2) net on a small disc."""
    return build_net(NetConfig(2.0, r_max=1000.0))


@pytest.fixture(scope="session")
def net_single():
    return build_net(NetConfig(1.0, r_max=100.0))


@pytest.fixture(scope="session")
def nets_frac():
    """Nets wide enough for level-1 families at R0 = 4000."""
    return {rho: build_net(NetConfig(rho, r_max=2500.0)) for rho in (1.0, 1.5, 2.0, 2.5)}


_REPORTS = {}


@pytest.fixture(scope="session")
def dimension_reports(nets_frac):
    """Lazily built (report, tree) at depth 2, cap 64, seed 0 for each rho."""
    from zlab.fractal.estimators import dimension_report

    def get(rho):
        if rho not in _REPORTS:
            _REPORTS[rho] = dimension_report(rho, depth=2, caps=64, seeds=0, net=nets_frac[rho], return_tree=True)
        return _REPORTS[rho]

    return get


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def verdict():
    """Record and print one PASS/FAIL line for a criterion, then assert it."""

    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
