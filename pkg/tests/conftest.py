import numpy as np
import pytest

from dffoct.core import Stack

ACCEPTANCE = {
    1: "bias-detection ratio",
    2: "Rayleigh law of bridge suprema",
    3: "sqrt(t) scaling of bridge suprema",
    4: "SVD round-trip and removed energy",
    5: "artifact removal on lung-like stack",
    6: "detector sanity",
    7: "SNR gain cumsum over std",
    8: "combined pipeline SNR",
    9: "determinism of manifest reruns",
    10: "format robustness under fuzzing",
}
_results = {}


class _Recorder:
    def __call__(self, number, passed, detail):
        _results[number] = (bool(passed), detail)
        return passed


@pytest.fixture
def acceptance():
    """Record the outcome of an acceptance criterion for the summary."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, name in ACCEPTANCE.items():
        if n in _results:
            passed, detail = _results[n]
            tr.write_line(f"C{n:<2} {'PASS' if passed else 'FAIL'}  {name}: {detail}")
        else:
            tr.write_line(f"C{n:<2} NOT RUN  {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_stack(rng):
    return Stack(rng.normal(size=(40, 6, 5)).astype(np.float32), frame_rate_hz=150.0, wavelength_nm=660.0)
