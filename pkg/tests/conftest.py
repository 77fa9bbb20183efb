import numpy as np
import pytest

from strongrhi.measure import AxisGrid, GridMeasure, Rect, Weight

W0_VALUES = np.array([1.0, 1.0, 1.0, 2.0])


def w0_pair():
    grid = AxisGrid.uniform([(0.0, 1.0)], [4])
    return Weight(grid, W0_VALUES.copy()), GridMeasure.lebesgue(grid)


@pytest.fixture
def w0():
    return w0_pair()


@pytest.fixture
def unit():
    return Rect([(0.0, 1.0)])


def random_pair(rng, shape, density_ratio=8.0, weight_ratio=8.0, jitter=True):
    """Random grid, density and weight with max/min ratios bounded as given."""
    bps = []
    for k in shape:
        b = np.linspace(0.0, 1.0, k + 1)
        if jitter and k > 1:
            b[1:-1] += rng.uniform(-0.25, 0.25, k - 1) / k
        bps.append(b)
    grid = AxisGrid(tuple(bps))
    dens = np.exp(rng.uniform(0.0, np.log(density_ratio), grid.shape))
    vals = np.exp(rng.uniform(0.0, np.log(weight_ratio), grid.shape))
    return Weight(grid, vals), GridMeasure(grid, dens * grid.cell_volumes())


# -- acceptance summary: one PASS/FAIL line per criterion -------------------

_AC_RESULTS = {}
_AC_NOTES = {}


@pytest.fixture
def ac_note(request):
    """Attach measured values to the summary line of the current criterion."""
    label = request.node.get_closest_marker("ac").args[0]

    def note(text):
        _AC_NOTES.setdefault(label, []).append(text)

    return note


def pytest_configure(config):
    config.addinivalue_line("markers", "ac(label, text): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    label = getattr(report, "_ac", None)
    if label is None:
        return
    if report.when == "call" or report.outcome == "failed":
        prev = _AC_RESULTS.get(label[0])
        ok = report.outcome == "passed" and (prev is None or prev[0])
        _AC_RESULTS[label[0]] = (ok, label[1])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("ac")
    if mark is not None:
        outcome.get_result()._ac = mark.args


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")

    def order(k):
        tail = k[2:]
        return (0, int(tail)) if tail.isdigit() else (1, tail)

    for key in sorted(_AC_RESULTS, key=order):
        ok, text = _AC_RESULTS[key]
        status = "PASS" if ok else "FAIL"
        if key.startswith("report"):
            status = "INFO"
        notes = "; ".join(_AC_NOTES.get(key, []))
        terminalreporter.write_line(f"{key:<7} {status}  {text}" + (f"  [{notes}]" if notes else ""))
