import math

import numpy as np
import pytest
from conftest import random_polytope
from hypothesis import given
from hypothesis import strategies as st

from multinorm.normed_core import LpNorm, PolytopeFacets, PolytopeVertices, dualize, eval_norm
from multinorm.tensor_core import (
    NormEstimate,
    TensorElement,
    bilinear_sup,
    combine_sup,
    injective_norm,
    module_action,
    operator_norm,
)

POLY_PS = [1, np.inf]


def test_norm_estimate_invariants():
    with pytest.raises(ValueError):
        NormEstimate(2.0, 1.0, False)
    e = NormEstimate.from_bounds(1.0, 1.0 + 1e-10)
    assert e.exact
    assert not NormEstimate.from_bounds(1.0, 1.1).exact
    assert NormEstimate(0.5, math.inf, False).to_json() == {"lower": 0.5, "upper": None, "exact": False}
    assert NormEstimate.from_json({"lower": 0.5, "upper": None, "exact": False}).upper == math.inf
    assert combine_sup([NormEstimate.exact_value(1), NormEstimate.exact_value(2)]).upper == 2
    assert combine_sup([]).upper == 0


def test_tensor_json_and_shape_checks():
    u = TensorElement.elementary([1, 2], [3, 0, 1])
    assert (u.l_dim, u.e_dim, u.rank()) == (2, 3, 1)
    assert np.array_equal(TensorElement.from_json(u.to_json()).coeffs, u.coeffs)
    with pytest.raises(Exception, match="shape"):
        TensorElement.from_json({"l_dim": 3, "e_dim": 3, "coeffs": [[1, 2, 3]]})


def test_module_action_examples(rng):
    U = rng.standard_normal((3, 2))
    assert np.array_equal(module_action(np.eye(3), TensorElement(U)).coeffs, U)
    Q = np.diag([1.0, 0.0, 1.0])
    out = module_action(Q, TensorElement(U)).coeffs
    assert np.all(out[1] == 0) and np.array_equal(out[[0, 2]], U[[0, 2]])
    xi, x = rng.standard_normal(3), rng.standard_normal(2)
    a = rng.standard_normal((3, 3))
    assert np.allclose(module_action(a, TensorElement.elementary(xi, x)).coeffs, np.outer(a @ xi, x))
    with pytest.raises(ValueError):
        module_action(np.eye(2), TensorElement(U))


def test_injective_examples():
    # ell_1^2 (x) ell_1^2 with identity coefficients: both dual balls are cubes
    est = injective_norm(LpNorm(1, 2), LpNorm(1, 2), TensorElement(np.eye(2)))
    assert est.exact and est.lower == 2.0
    for p in [1, np.inf]:
        for n in range(1, 6):
            w = injective_norm(LpNorm(p, n), dualize(LpNorm(p, n)), TensorElement(np.eye(n)), method="enumerate")
            assert w.exact and w.lower == pytest.approx(1.0, abs=1e-15)


@given(st.sampled_from([1, 1.5, 2, 3, np.inf]), st.sampled_from([1, 2, np.inf]), st.integers(0, 2**31 - 1))
def test_cross_norm_rank_one(p, q, seed):
    rng = np.random.default_rng(seed)
    L, E = LpNorm(p, 3), LpNorm(q, 2)
    xi, x = rng.standard_normal(3), rng.standard_normal(2)
    est = injective_norm(L, E, TensorElement.elementary(xi, x))
    target = eval_norm(L, xi) * eval_norm(E, x)
    assert est.lower <= target * (1 + 1e-10) + 1e-12
    assert est.lower == pytest.approx(target, rel=1e-10)


@given(st.integers(0, 2**31 - 1))
def test_cross_norm_polytopes(seed):
    rng = np.random.default_rng(seed)
    L = PolytopeVertices(random_polytope(rng, 2))
    E = PolytopeFacets(random_polytope(rng, 3))
    xi, x = rng.standard_normal(2), rng.standard_normal(3)
    est = injective_norm(L, E, TensorElement.elementary(xi, x))
    assert est.exact
    assert est.lower == pytest.approx(eval_norm(L, xi) * eval_norm(E, x), rel=1e-9)


def test_spectral_case_and_ascent():
    rng = np.random.default_rng(3)
    U = rng.standard_normal((4, 3))
    est = injective_norm(LpNorm(2, 4), LpNorm(2, 3), TensorElement(U))
    assert est.exact and est.lower == pytest.approx(np.linalg.norm(U, 2), rel=1e-12)
    asc = injective_norm(LpNorm(2, 4), LpNorm(2, 3), TensorElement(U), method="ascent")
    assert asc.lower == pytest.approx(np.linalg.norm(U, 2), abs=1e-8)
    assert asc.upper >= asc.lower


def test_generic_ascent_bounds_bracket_enumeration():
    rng = np.random.default_rng(4)
    U = rng.standard_normal((3, 3))
    exact = injective_norm(LpNorm(1, 3), LpNorm(np.inf, 3), TensorElement(U), method="enumerate")
    asc = injective_norm(LpNorm(1, 3), LpNorm(np.inf, 3), TensorElement(U), method="ascent")
    assert asc.lower <= exact.lower + 1e-12 and exact.upper <= asc.upper + 1e-12
    mixed = injective_norm(LpNorm(3, 3), LpNorm(1.5, 3), TensorElement(U))
    assert 0 < mixed.lower <= mixed.upper < math.inf


@given(st.sampled_from(POLY_PS), st.sampled_from([1, np.inf, 2]), st.integers(0, 2**31 - 1))
def test_injective_norm_is_contractive(p, q, seed):
    rng = np.random.default_rng(seed)
    L, E = LpNorm(p, 3), LpNorm(q, 2)
    U = rng.standard_normal((3, 2))
    a = rng.standard_normal((3, 3))
    a = a / (operator_norm(a, L, L).upper * (1 + 1e-12))
    before = injective_norm(L, E, TensorElement(U))
    after = injective_norm(L, E, module_action(a, TensorElement(U)))
    assert after.lower <= before.upper + 1e-9


@given(st.sampled_from(POLY_PS), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_injective_equals_associated_operator_norm(p, N, r, seed):
    # v in L (x) (L^nu)* versus the map L^nu -> L, eta -> V eta
    V = np.random.default_rng(seed).standard_normal((N, r))
    L, Lnu = LpNorm(p, N), LpNorm(p, r)
    a = injective_norm(L, dualize(Lnu), TensorElement(V))
    b = operator_norm(V, Lnu, L)
    assert a.exact and b.exact
    assert a.lower == pytest.approx(b.lower, abs=1e-9)


def test_operator_norm_examples():
    for spec in [LpNorm(1, 3), LpNorm(np.inf, 3), LpNorm(2, 3), PolytopeVertices(np.eye(3) * 2)]:
        assert operator_norm(np.eye(3), spec, spec).lower == pytest.approx(1.0)
        assert operator_norm(2 * np.eye(3), spec, spec).lower == pytest.approx(2.0)
    est = operator_norm(np.array([[1.0, 1.0]]), LpNorm(1, 2), LpNorm(1, 1))
    assert est.exact and est.lower == 1.0
    with pytest.raises(ValueError):
        operator_norm(np.eye(2), LpNorm(1, 3), LpNorm(1, 2))


@given(st.sampled_from([LpNorm(1, 3), LpNorm(np.inf, 3), PolytopeVertices(np.array([[1, 0, 0], [1, 1, 0], [0, 1, 1]]))]),
       st.integers(0, 2**31 - 1))
def test_operator_norm_submultiplicative(spec, seed):
    rng = np.random.default_rng(seed)
    S, T = rng.standard_normal((2, 3, 3))
    st_ = operator_norm(S @ T, spec, spec)
    s, t = operator_norm(S, spec, spec), operator_norm(T, spec, spec)
    assert st_.lower <= s.upper * t.upper + 1e-9


def test_bilinear_sup_method_validation():
    with pytest.raises(ValueError):
        bilinear_sup(np.eye(2), LpNorm(1, 2), LpNorm(1, 2), method="nope")
