import pytest

from wvafisher import kernels
from wvafisher.quantum import gaussian_meter

KERNEL_NAMES = ("projection_sums", "cell_amplitudes", "cell_probabilities", "loglik_counts")
BACKENDS = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every kernel call through one backend for the duration of a test."""
    impl = kernels.python_backend if request.param == "python" else kernels.compiled_backend
    for name in KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


@pytest.fixture(scope="session")
def meter1():
    return gaussian_meter(1.0)


@pytest.fixture(scope="session")
def meter2():
    return gaussian_meter(2.0)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
