import pytest

from feedback_gi.mask import build_mask_sequence
from feedback_gi.scene import letter_stencil


@pytest.fixture(scope="session")
def mask35():
    return build_mask_sequence(35, 5)


@pytest.fixture(scope="session")
def mask6():
    return build_mask_sequence(6, 2)


@pytest.fixture(scope="session")
def letters35():
    return {c: letter_stencil(c, 35) for c in "XJTU"}


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
