import pytest

from rvh.core import RangeVector, RangeVectorSet, RvhClassifier
from rvh.ruleset import parse_toy

# The ten-rule, 5-bit sample classifier used throughout the worked example.
TOY_TEXT = """\
!widths 5 5
0 100/3   11010/5 2 Fwd 0
1 101/3   1001/4  2 Fwd 1
2 11111/5 10000/5 4 Drop
3 111/3   1000/4  2 Fwd 4
4 0100/4  0110/4  3 Fwd 0
5 001/3   01001/5 3 Fwd 2
6 00/2    01001/5 3 Drop
7 01110/5 */0     2 Drop
8 110/3   1/1     1 Fwd 1
9 */0     */0     0 Fwd 3
"""

# Its four range-vectors, numbered as in the worked example (half-open).
TOY_VECTORS = [
    ((3, 6), (4, 6)),
    ((3, 6), (0, 4)),
    ((0, 3), (4, 6)),
    ((0, 3), (0, 4)),
]


@pytest.fixture
def toy():
    return parse_toy(TOY_TEXT, "toy")


@pytest.fixture
def toy_partition():
    return RangeVectorSet([RangeVector(v) for v in TOY_VECTORS], (5, 5))


@pytest.fixture
def toy_rvh(toy, toy_partition):
    return RvhClassifier(toy_partition, toy.rules)


@pytest.fixture
def toy_path(tmp_path):
    p = tmp_path / "toy.rules"
    p.write_text(TOY_TEXT)
    return p


def all_toy_packets():
    return [(a, b) for a in range(32) for b in range(32)]


# -- acceptance reporting -----------------------------------------------------

_ACCEPTANCE = []


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    _ACCEPTANCE.append((number, title, call.excinfo is None, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
