import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fpspec.basis0 import build_basis, solve_psi  # noqa: E402
from fpspec.eigen import scan  # noqa: E402
from fpspec.model import make_params  # noqa: E402

# eta grid of the scaling and kappa cross-checks: 10 points over two decades
SCAN_ETAS = [float(e) for e in np.logspace(-2, -4, 10)]

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def params3():
    return make_params(3.0)


@pytest.fixture(scope="session")
def params4():
    return make_params(4.0)


@pytest.fixture(scope="session")
def basis3(params3):
    return build_basis(solve_psi(params3), params3)


@pytest.fixture(scope="session")
def scan3(params3):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return scan(SCAN_ETAS, params3)


@pytest.fixture(scope="session")
def scan4(params4):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return scan(SCAN_ETAS, params4)


@pytest.fixture
def report():
    """record(name, ok, detail): one summary line per acceptance criterion."""
    def record(name: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append((name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
