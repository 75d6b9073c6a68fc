import sys

import pytest

from cascade_lab import _backend


@pytest.fixture(params=_backend.available())
def backend(request):
    """Run a test once per available kernel implementation."""
    previous = _backend.backend_name()
    _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(previous)



def pytest_terminal_summary(terminalreporter):
    module = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(module, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
