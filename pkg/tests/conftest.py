import numpy as np
import pytest

from convaccel.tensors import FeatureMap, KernelSet

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        crit = dict(report.user_properties).get("criterion")
        if crit is not None:
            _criteria[crit] = (report.outcome, dict(report.user_properties)["criterion_text"])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        outcome, text = _criteria[n]
        terminalreporter.write_line(f"AC{n:<2} {'PASS' if outcome == 'passed' else 'FAIL'}  {text}")


@pytest.fixture(autouse=True)
def _tag_criterion(request):
    marker = request.node.get_closest_marker("criterion")
    if marker is not None:
        request.node.user_properties.append(("criterion", marker.args[0]))
        request.node.user_properties.append(("criterion_text", marker.args[1]))


def random_feature_map(rng, shape, lo=-512, hi=512):
    return FeatureMap(rng.integers(lo, hi, size=shape).astype(np.int16))


def random_kernels(rng, M, N, Hk, Wk=None, lo=-128, hi=128):
    Wk = Hk if Wk is None else Wk
    return KernelSet(rng.integers(lo, hi, size=(M, N, Hk, Wk)).astype(np.int16),
                     rng.integers(lo, hi, size=M).astype(np.int16))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
