import itertools
import json
import math

import numpy as np
import pytest
from conftest import norm_specs, random_polytope
from hypothesis import given
from hypothesis import strategies as st

from multinorm.normed_core import (
    DualOf,
    L1Sum,
    LpNorm,
    NormSpecError,
    PolytopeFacets,
    PolytopeVertices,
    Unavailable,
    auerbach_basis,
    ball_maximizer,
    conjugate_exponent,
    count_extreme_points,
    dualize,
    eval_norm,
    eval_norm_rows,
    extreme_points,
    is_polyhedral,
    norming_functional,
    spec_from_json,
    spec_to_json,
    vector_from_json,
)

CROSS = PolytopeVertices([[1, 0], [0, 1]])
HEXAGON = PolytopeVertices([[math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)] for k in range(3)])


def _vec(draw, n):
    return np.array(draw(st.lists(st.floats(-10, 10), min_size=n, max_size=n)))


def test_euclidean_norm_example():
    assert eval_norm(LpNorm(2, 2), [3, 4]) == pytest.approx(5.0, abs=1e-15)


def test_l1_norm_example():
    assert eval_norm(LpNorm(1, 3), [1, -2, 3]) == 6.0


def test_cross_polytope_gauge_lp():
    assert eval_norm(CROSS, [1, 1]) == pytest.approx(2.0, abs=1e-12)
    rng = np.random.default_rng(0)
    for x in rng.standard_normal((50, 2)):
        assert eval_norm(CROSS, x) == pytest.approx(np.abs(x).sum(), abs=1e-10)


def test_facets_and_l1sum_closed_forms():
    F = PolytopeFacets([[1, 0], [1, 1]])
    assert eval_norm(F, [1, -3]) == pytest.approx(2.0)
    S = L1Sum((LpNorm(2, 2), LpNorm(np.inf, 1)))
    assert eval_norm(S, [3, 4, -2]) == pytest.approx(7.0)


def test_eval_errors():
    with pytest.raises(NormSpecError, match="dimension"):
        eval_norm(LpNorm(1, 2), [1, 2, 3])
    with pytest.raises(NormSpecError, match="interior"):
        eval_norm(PolytopeVertices([[1, 0], [2, 0]]), [0, 1])
    with pytest.raises(NormSpecError):
        LpNorm(0.5, 2)


def test_dualize_examples():
    assert dualize(LpNorm(1, 3)) == LpNorm(np.inf, 3)
    assert dualize(LpNorm(2, 3)) == LpNorm(2, 3)
    assert dualize(LpNorm(3, 2)) == LpNorm(1.5, 2)
    assert conjugate_exponent(np.inf) == 1
    D = dualize(CROSS)
    assert isinstance(D, PolytopeFacets)
    assert np.array_equal(D.facets, CROSS.vertices)
    assert dualize(D) == CROSS
    rng = np.random.default_rng(1)
    for f in rng.standard_normal((100, 2)):
        assert eval_norm(D, f) == pytest.approx(np.abs(f).max(), abs=1e-12)
    assert isinstance(dualize(L1Sum((LpNorm(1, 1), LpNorm(2, 2)))), DualOf)


def test_extreme_point_examples():
    P1 = extreme_points(LpNorm(1, 2))
    assert {tuple(v) for v in P1} == {(1, 0), (0, 1), (-1, 0), (0, -1)}
    Pi = extreme_points(LpNorm(np.inf, 2))
    assert {tuple(v) for v in Pi} == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
    assert isinstance(extreme_points(LpNorm(2, 2)), Unavailable)
    big = extreme_points(LpNorm(np.inf, 25))
    assert isinstance(big, Unavailable) and "cap" in big.reason
    assert not big
    S = extreme_points(L1Sum((LpNorm(np.inf, 2), LpNorm(1, 1))))
    assert len(S) == 6
    assert count_extreme_points(LpNorm(np.inf, 3), half=True) == 4
    assert isinstance(extreme_points(PolytopeFacets([[1, 0], [0, 1]])), Unavailable)


@given(norm_specs(), st.floats(-5, 5), st.integers(0, 2**31 - 1))
def test_homogeneity(spec, t, seed):
    x = np.random.default_rng(seed).standard_normal(spec.dim)
    a, b = eval_norm(spec, t * x), abs(t) * eval_norm(spec, x)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@given(norm_specs(), st.integers(0, 2**31 - 1))
def test_triangle_inequality(spec, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, spec.dim)) * 3
    assert eval_norm(spec, x + y) <= eval_norm(spec, x) + eval_norm(spec, y) + 1e-10


@given(norm_specs(), st.integers(0, 2**31 - 1))
def test_duality_consistency(spec, seed):
    pts = extreme_points(spec)
    if isinstance(pts, Unavailable):
        return
    f = np.random.default_rng(seed).standard_normal(spec.dim)
    assert eval_norm(dualize(spec), f) == pytest.approx(np.abs(pts @ f).max(), abs=1e-10)


@given(norm_specs(), st.integers(0, 2**31 - 1))
def test_norming_functional_and_maximizer(spec, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(spec.dim)
    f = norming_functional(spec, x)
    assert eval_norm(dualize(spec), f) <= 1 + 1e-7
    assert f @ x == pytest.approx(eval_norm(spec, x), rel=1e-6, abs=1e-8)
    c = rng.standard_normal(spec.dim)
    y = ball_maximizer(spec, c)
    assert eval_norm(spec, y) <= 1 + 1e-7
    assert c @ y == pytest.approx(eval_norm(dualize(spec), c), rel=1e-6, abs=1e-8)


def test_rows_agree_with_single_evaluations(rng):
    spec = PolytopeVertices(random_polytope(rng, 3))
    X = rng.standard_normal((7, 3))
    rows = eval_norm_rows(spec, X)
    assert np.allclose(rows, [eval_norm(spec, x) for x in X], atol=1e-10)


def test_polyhedral_flags():
    assert is_polyhedral(LpNorm(1, 3)) and is_polyhedral(CROSS)
    assert not is_polyhedral(LpNorm(2, 3))
    assert is_polyhedral(DualOf(CROSS))


def _assert_auerbach(spec, B):
    n = spec.dim
    assert B.biorthogonality_error() <= 1e-10
    for k in range(n):
        assert eval_norm(spec, B.primal[:, k]) == pytest.approx(1.0, abs=1e-10)
        assert eval_norm(dualize(spec), B.dual[k]) <= 1 + 1e-8


@pytest.mark.parametrize("p", [1, 1.5, 2, np.inf])
def test_auerbach_lp_is_canonical(p):
    B = auerbach_basis(LpNorm(p, 4))
    assert np.array_equal(B.primal, np.eye(4))
    _assert_auerbach(LpNorm(p, 4), B)


def test_auerbach_hexagon_matches_brute_force():
    B = auerbach_basis(HEXAGON)
    _assert_auerbach(HEXAGON, B)
    verts = np.vstack([HEXAGON.vertices, -HEXAGON.vertices])
    best = max(abs(np.linalg.det(np.column_stack([a, b]))) for a, b in itertools.combinations(verts, 2))
    assert B.determinant == pytest.approx(best, abs=1e-12)
    for k in range(2):
        assert np.min(np.abs(verts - B.primal[:, k]).sum(axis=1)) <= 1e-12


@given(st.integers(2, 4), st.integers(0, 2**31 - 1), st.sampled_from(["v", "f"]))
def test_auerbach_invariants_random_polytopes(n, seed, kind):
    V = random_polytope(np.random.default_rng(seed), n)
    spec = PolytopeVertices(V) if kind == "v" else PolytopeFacets(V)
    B = auerbach_basis(spec)
    assert B.converged
    _assert_auerbach(spec, B)


def test_auerbach_dimension_cap():
    with pytest.raises(NormSpecError):
        auerbach_basis(PolytopeVertices(np.eye(51)))


@pytest.mark.parametrize("spec", [
    LpNorm(1, 2), LpNorm(np.inf, 3), LpNorm(2.5, 2), CROSS, PolytopeFacets([[1, 2], [0, 1]]),
    DualOf(LpNorm(3, 2)), L1Sum((LpNorm(1, 1), CROSS)),
])
def test_spec_json_round_trip(spec):
    back = spec_from_json(json.loads(json.dumps(spec_to_json(spec))))
    assert back == spec
    x = np.arange(1, spec.dim + 1) / 7
    assert eval_norm(back, x) == eval_norm(spec, x)


def test_spec_json_errors_name_the_field():
    with pytest.raises(NormSpecError, match="kind"):
        spec_from_json({"p": 1})
    with pytest.raises(NormSpecError, match="dim"):
        spec_from_json({"kind": "lp", "p": 1})
    with pytest.raises(NormSpecError, match=r"blocks\[1\]"):
        spec_from_json({"kind": "l1sum", "blocks": [{"kind": "lp", "p": 1, "dim": 1}, {"kind": "nope"}]})


def test_rational_strings_accepted():
    assert np.array_equal(vector_from_json(["1/2", 3, "-2/4"]), np.array([0.5, 3.0, -0.5]))
    with pytest.raises(NormSpecError):
        vector_from_json(["1/0"])
