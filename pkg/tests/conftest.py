import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long reproduction checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running reproduction checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One line per acceptance criterion, recorded by tests/test_acceptance.py."""
    rows = getattr(config, "acceptance_rows", None)
    if not rows:
        return
    by_criterion: dict[int, list] = {}
    for number, part, ok, detail in rows:
        by_criterion.setdefault(number, []).append((part, ok, detail))
    terminalreporter.section("acceptance criteria")
    for number in sorted(by_criterion):
        parts = by_criterion[number]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p}: {'ok' if ok else 'FAIL'} {d}" for p, ok, d in parts)
        terminalreporter.write_line(f"criterion {number} {verdict} | {detail}")
