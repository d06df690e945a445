import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from multinorm.normed_core import DualOf, L1Sum, LpNorm, PolytopeFacets, PolytopeVertices

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


def random_polytope(rng, n, k=None):
    """Symmetric vertex set whose hull contains a neighbourhood of the origin."""
    k = k or n + 2
    V = rng.standard_normal((k, n))
    V[:n] += 3 * np.eye(n)
    return V


@st.composite
def norm_specs(draw, max_dim=4):
    n = draw(st.integers(1, max_dim))
    kind = draw(st.sampled_from(["lp", "poly_v", "poly_f", "dual", "l1sum"]))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    if kind == "lp":
        p = draw(st.sampled_from([1, 1.5, 2, 3, np.inf]))
        return LpNorm(p, n)
    if kind == "poly_v":
        return PolytopeVertices(random_polytope(rng, n))
    if kind == "poly_f":
        return PolytopeFacets(random_polytope(rng, n))
    if kind == "dual":
        inner = draw(st.sampled_from(["poly_v", "lp"]))
        return DualOf(PolytopeVertices(random_polytope(rng, n)) if inner == "poly_v" else LpNorm(3, n))
    a = draw(st.integers(1, 2))
    return L1Sum((LpNorm(np.inf, a), LpNorm(draw(st.sampled_from([1, 2])), draw(st.integers(1, 2)))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
