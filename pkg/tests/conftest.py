import pytest

from asymdiv.divisor import Params

PAIRS = [(1, 2), (2, 3), (1, 4)]
CONGRUENCES = [(1, 1, 1, 1), (2, 1, 3, 2)]  # (M1, l1, M2, l2)
SIX_SETS = [Params(a, b, M1, M2, l1, l2) for a, b in PAIRS for M1, l1, M2, l2 in CONGRUENCES]


def set_id(p):
    return f"{p.a}{p.b}-{p.M1}{p.l1}{p.M2}{p.l2}"


@pytest.fixture(params=SIX_SETS, ids=set_id)
def pset(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
