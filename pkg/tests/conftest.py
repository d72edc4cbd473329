import os
from collections import OrderedDict
from pathlib import Path

import pytest

from pmo.io import load_problem

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"

_criteria = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion covered by the test")


@pytest.fixture(scope="session")
def problem():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_problem(PROBLEMS / f"{name}.json")
        return cache[name]
    return get


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    entry = _criteria.setdefault(n, {"text": text, "ok": True, "tests": 0})
    if rep.when == "call":
        entry["tests"] += 1
    if rep.failed or (rep.when == "call" and rep.skipped):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        status = "PASS" if e["ok"] and e["tests"] else "FAIL"
        terminalreporter.write_line(f"{status} criterion {n}: {e['text']} ({e['tests']} checks)")
