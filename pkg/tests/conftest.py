import functools
import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=1000, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# -- independent oracles shared by several test modules ----------------------

def brute_blocks(a: str, b: str, min_len: int):
    """Recursive longest-common-substring decomposition, written naively.

    Scans every (i, j) start and extends; ties go to the smallest i, then j.
    """
    out = []

    def rec(alo, ahi, blo, bhi):
        best = (0, 0, 0)
        for i in range(alo, ahi):
            for j in range(blo, bhi):
                k = 0
                while i + k < ahi and j + k < bhi and a[i + k] == b[j + k]:
                    k += 1
                if k > best[2]:
                    best = (i, j, k)
        i, j, k = best
        if k < min_len or k == 0:
            return
        rec(alo, i, blo, j)
        out.append((i, j, k))
        rec(i + k, ahi, j + k, bhi)

    rec(0, len(a), 0, len(b))
    return out


def brute_levenshtein(a, b):
    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


# -- acceptance summary: one PASS/FAIL line per criterion --------------------

_criteria: dict[str, tuple[int, str]] = {}
_outcomes: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _criteria[item.nodeid] = (mark.args[0], mark.args[1])


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    number = _criteria[report.nodeid][0]
    if report.failed:
        _outcomes[number] = "FAIL"
    elif report.when == "call" and report.passed:
        _outcomes.setdefault(number, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in sorted(set(_criteria.values())):
        terminalreporter.write_line(f"criterion {number:2d} {_outcomes.get(number, 'NOT RUN'):7s} {title}")
