from __future__ import annotations

import pytest

from riskhtn import UtilitySpec, ground, parse_domain, parse_problem
from riskhtn.domains import bundled


@pytest.fixture(scope="session")
def marine_domain():
    return parse_domain(bundled("marine.htn.json").read_text())


@pytest.fixture(scope="session")
def marine_problem(marine_domain):
    return parse_problem(bundled("marine.prob.json").read_text(), marine_domain)


@pytest.fixture(scope="session")
def marine_gm(marine_domain, marine_problem):
    return ground(marine_domain, marine_problem)


@pytest.fixture(scope="session")
def linear():
    return UtilitySpec.linear()


@pytest.fixture(scope="session")
def averse():
    return UtilitySpec.exponential(-1, 0.2)


@pytest.fixture(scope="session")
def seeking():
    return UtilitySpec.exponential(1, 0.2)


@pytest.fixture(scope="session")
def one_switch():
    return UtilitySpec.one_switch(5.0, 0.04, 100.0)


ATTITUDES = ["linear", "averse", "seeking"]


@pytest.fixture(params=ATTITUDES, scope="session")
def static_spec(request):
    return {
        "linear": UtilitySpec.linear(),
        "averse": UtilitySpec.exponential(-1, 0.2),
        "seeking": UtilitySpec.exponential(1, 0.2),
    }[request.param]
