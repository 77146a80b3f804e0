import math
import os
import sys

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from softrelax.geometry import Ball, MaterialModel, SqrtPotential  # noqa: E402
from softrelax.tensors import DevTensor2, Elasticity  # noqa: E402

settings.register_profile("default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

finite = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False, allow_infinity=False)
devs = st.builds(DevTensor2, finite, finite)


@pytest.fixture
def reference_model():
    return MaterialModel(Elasticity(1.0, 1.0), Ball(1.0), SqrtPotential(0.5))


@pytest.fixture
def unit_load():
    s = 1.0 / math.sqrt(2.0)
    return ((s, 0.0), (0.0, -s))


_ACCEPTANCE = []


def record_criterion(number, title, ok, detail):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    _ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
