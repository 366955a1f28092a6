import math

import numpy as np
import pytest
from hypothesis import settings
from scipy import integrate

from cuspflow import ProfileSurface

settings.register_profile("cuspflow", max_examples=25, deadline=None)
settings.load_profile("cuspflow")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)


@pytest.fixture(params=[2.5, 3.0, 4.0], ids=lambda r: f"r{r:g}")
def surface(request):
    return ProfileSurface(request.param)


@pytest.fixture
def surface3():
    return ProfileSurface(3.0)


def sqrt_e(r, x):
    return math.sqrt(1.0 + r * r * x ** (2 * r - 2))


def clairaut_oracle(r, x_entry, b, with_winding=True):
    """Exact duration and winding of an excursion from the 1-D Clairaut quadratures.

    With ``c = x_entry**r * b`` the turning point is ``x_min = c**(1/r)``;
    substituting ``x = x_min + s**2`` removes the square-root endpoint singularity.
    """
    c = x_entry ** r * b
    x_min = c ** (1.0 / r)
    s_max = math.sqrt(x_entry - x_min)

    def radial(s):
        # 1 - (x_min / x)**(2r) without cancellation
        x = x_min + s * s
        return -math.expm1(2.0 * r * math.log1p(-s * s / x))

    def dur(s):
        x = x_min + s * s
        if s == 0.0:
            return 2.0 * sqrt_e(r, x) / math.sqrt(2.0 * r / x_min)
        return sqrt_e(r, x) / math.sqrt(radial(s)) * 2.0 * s

    def wind(s):
        x = x_min + s * s
        if s == 0.0:
            return c * sqrt_e(r, x) / x ** (2 * r) * 2.0 / math.sqrt(2.0 * r / x_min)
        return c * sqrt_e(r, x) / (x ** (2 * r) * math.sqrt(radial(s))) * 2.0 * s

    kw = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    d, _ = integrate.quad(dur, 0.0, s_max, **kw)
    if not with_winding:
        return 2.0 * d, None
    w, _ = integrate.quad(wind, 0.0, s_max, **kw)
    return 2.0 * d, w / math.pi
