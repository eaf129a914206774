import pytest

from flatrenorm.diffeo import PrecisionPolicy
from flatrenorm.maps import MapX
from flatrenorm.renorm import iterate, tune_parameter

# templates shared by the slow fixtures
TEMPLATE_22 = dict(x1=-0.3, x2=0.03, x3=0.1, x4=0.9, s=0.5, l1=2, l2=2)
# a point near the (3,3) attractor, so the run starts inside the bounded regime
TEMPLATE_33 = dict(x1="-0.0898", x2="0.00324", x3="0.00346", x4="0.99154", s="0.148", l1=3, l2=3)
# large flat interval (|[x3, x4]| = 0.9) for the degenerate (1,2) run
TEMPLATE_12 = dict(x1=-0.3, x2=0.015, x3=0.05, x4=0.95, s=0.5, l1=1, l2=2)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")
    config._criteria = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    n, title = marker.args
    ok = call.excinfo is None
    detail = dict(item.user_properties).get("detail", "")
    item.config._criteria[n] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    crit = getattr(config, "_criteria", {})
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(crit):
        title, ok, detail = crit[n]
        line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}"
        if detail:
            line += f" :: {detail}"
        terminalreporter.write_line(line)


class Tuned:
    def __init__(self, template, depth, levels, bits, chart="x", bracket=None):
        self.policy = PrecisionPolicy(bits)
        with self.policy.activate():
            self.result = tune_parameter(MapX(**template), depth, self.policy, "x2", bracket, chart=chart)
            self.map = self.result.map
            self.trace = iterate(self.map, levels, self.policy, chart=chart)


@pytest.fixture(scope="session")
def tuned22():
    """(2,2) identity-diffeo map tuned to depth 12, traced over 12 levels."""
    return Tuned(TEMPLATE_22, 12, 12, 256, bracket=(0, 0.1))


@pytest.fixture(scope="session")
def tuned33():
    """(3,3) map tuned to depth 14, traced over 12 levels."""
    return Tuned(TEMPLATE_33, 14, 12, 256)


@pytest.fixture(scope="session")
def tuned12():
    """(1,2) map with a large flat interval, tuned to depth 13 at 512 bits."""
    return Tuned(TEMPLATE_12, 13, 13, 512, chart="s")
