import pytest

from app.services.case_parser import parse_case
from app.services.fixtures import load_fixture
from app.services.lodf import compute_lodf
from app.services.scopf import solve_scopf

CHAIN_CASE = """\
# Topology (Line) Information
1    1    2    10    5
2    2    3    10    5
3    3    1    10    5
4    3    4    10    5
# Bus Types (bus no, is generator?, is load?)
1    1    0
2    0    1
3    1    0
4    0    1
# Generator Information (bus no, max generation, min generation, cost coefficients alpha, beta)
1    5    0    0    10
3    5    0    0    20
# Load Information (bus no, current load, max load, min load)
2    1    2    0
4    1    2    0
# Measurement Information (measurement no, measurement taken?, secured?, can attacker alter?)
""" + "".join(f"{i}    1    0    1\n" for i in range(1, 13)) + """\
# Cost Constraint
-1
# Attacker's Resource Limitation (measurements, buses)
12    4
# Maximum percent of delta load
20
# % of minimum Overloading amount, % of lines to be overloaded
5    25
"""

# Equal admittances; buses 1 and 2 inject 10 and 2 pu into the 12 pu load at bus 3
TRIANGLE_CASE = """\
# Topology (Line) Information
1    1    2    1    20
2    1    3    1    20
3    2    3    1    20
# Bus Types (bus no, is generator?, is load?)
1    1    0
2    1    0
3    0    1
# Generator Information (bus no, max generation, min generation, cost coefficients alpha, beta)
1    15    0    0    10
2    15    0    0    20
# Load Information (bus no, current load, max load, min load)
3    12    15    0
# Measurement Information (measurement no, measurement taken?, secured?, can attacker alter?)
""" + "".join(f"{i}    1    0    1\n" for i in range(1, 10)) + """\
# Cost Constraint
-1
# Attacker's Resource Limitation (measurements, buses)
9    3
# Maximum percent of delta load
20
# % of minimum Overloading amount, % of lines to be overloaded
5    34
# Slack Bus
3
"""


@pytest.fixture(scope="session")
def three_bus():
    return load_fixture("3bus")[0]


@pytest.fixture(scope="session")
def ieee14():
    return load_fixture("ieee14")[0]


@pytest.fixture(scope="session")
def chain_case():
    """Triangle 1-2-3 with a radial spur to bus 4."""
    return parse_case(CHAIN_CASE)


@pytest.fixture(scope="session")
def three_bus_pre(three_bus):
    return solve_scopf(three_bus)


@pytest.fixture(scope="session")
def ieee14_lodf(ieee14):
    return compute_lodf(ieee14)


@pytest.fixture(scope="session")
def ieee14_pre(ieee14, ieee14_lodf):
    return solve_scopf(ieee14, lodf=ieee14_lodf)


@pytest.fixture(scope="session")
def triangle():
    return parse_case(TRIANGLE_CASE)
