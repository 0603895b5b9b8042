import os
from collections import OrderedDict
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"
FIXTURE = DATA / "retail_fixture_1000.csv"
RETAIL_CSV = os.environ.get("RETAIL_CSV", str(Path(__file__).parents[1] / "data" / "online_retail.csv"))

CRITERIA = OrderedDict(
    (n, title)
    for n, title in [
        (1, "cleaning counts on the full ledger"),
        (2, "RFM values for the five reference customers"),
        (3, "segment shares within 2 points"),
        (4, "elbow picks k = 3"),
        (5, "silhouette bands for all five clusterers"),
        (6, "property suites"),
        (7, "oracle equivalences"),
        (8, "determinism"),
    ]
)
_outcomes: dict[int, list[str]] = {}
_reasons: dict[int, str] = {}


@pytest.fixture(scope="session")
def fixture_csv() -> Path:
    return FIXTURE


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    n = props["criterion"]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if report.skipped:
            outcome = "BLOCKED"
            reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
            _reasons.setdefault(n, reason.removeprefix("Skipped: "))
        elif report.failed:
            outcome = "FAIL"
        else:
            outcome = "PASS"
        _outcomes.setdefault(n, []).append(outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", int(m.args[0])))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        got = _outcomes.get(n)
        if not got:
            continue
        if "FAIL" in got:
            status = "FAIL"
        elif "BLOCKED" in got:
            status = "BLOCKED"
        else:
            status = "PASS"
        line = f"criterion {n}: {status:7s} {title} ({len(got)} checks)"
        if status == "BLOCKED":
            line += f" | {_reasons.get(n, '')}"
        tr.write_line(line)
