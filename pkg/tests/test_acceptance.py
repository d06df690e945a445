"""The ten acceptance criteria, each at its stated tolerance.

Every test appends one PASS/FAIL line to the terminal summary (and prints it,
so ``pytest -s`` shows it inline) before asserting.
"""

import time

import numpy as np
import pytest
from conftest import ACCEPTANCE, random_polytope

from multinorm._exact import exact_equal, to_fractions
from multinorm.experiments import ScenarioConfig, run_scenario
from multinorm.free_objects import (
    I_bijection,
    I_nu,
    I_nu_inverse,
    RowFamily,
    build_free_space,
    canonical_pi,
    distinguished_w,
)
from multinorm.lspace_core import (
    Paving,
    ambient_norm,
    check_contractibility,
    make_level_min_space,
    make_min_space,
    make_spec_space,
    make_well_composed,
    oplus1_sum,
)
from multinorm.morphisms import LOperator, lb_norm, oplus_operators
from multinorm.normed_core import LpNorm, PolytopeVertices, dualize
from multinorm.tensor_core import injective_norm


def report(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  criterion {number:2d}  {title}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert passed, line


def random_paving(rng, max_n=6, max_levels=4, p=1):
    N = int(rng.integers(1, max_n + 1))
    subsets = set()
    want = int(rng.integers(1, max_levels + 1))
    for _ in range(50):
        if len(subsets) == want:
            break
        size = int(rng.integers(1, N + 1))
        subsets.add(tuple(sorted(rng.choice(N, size=size, replace=False).tolist())))
    return Paving(p, N, sorted(subsets))


def random_space(rng, P, max_e=4):
    """A contractible instance over P: MIN of a random polyhedral norm, an l1-sum, or well-composed."""
    kind = int(rng.integers(0, 4))
    if kind == 0:
        n = int(rng.integers(1, max_e + 1))
        return make_min_space(P, LpNorm([1, np.inf][int(rng.integers(0, 2))], n))
    if kind == 1:
        n = int(rng.integers(1, min(3, max_e) + 1))
        return make_min_space(P, PolytopeVertices(random_polytope(rng, n)))
    if kind == 2:
        a = int(rng.integers(1, max_e))
        b = int(rng.integers(1, max_e - a + 1))
        return oplus1_sum([make_min_space(P, LpNorm(1, a)), make_min_space(P, LpNorm(np.inf, b))])[0]
    picks, total = [], 0
    for nu in rng.permutation(len(P.levels)):
        if total + P.size(nu) <= max_e:
            picks.append(P.level_spec(int(nu)))
            total += P.size(nu)
    if not picks:
        return make_min_space(P, LpNorm(1, 1))
    return make_well_composed(P, picks)


def unit_rows(rng, E, scale=(0.1, 1.0)):
    row = {}
    for nu in range(len(E.paving.levels)):
        U = rng.standard_normal((E.paving.size(nu), E.e_dim))
        row[nu] = U / E.levels[nu].evaluate(U).upper * rng.uniform(*scale)
    return row


def test_criterion_1_level_operator_norm_identity():
    start = time.perf_counter()
    worst, uncertified = 0.0, 0
    for i in range(100):
        rng = np.random.default_rng([1, i])
        P = random_paving(rng)
        E = random_space(rng, P)
        nu = int(rng.integers(0, len(P.levels)))
        U = rng.standard_normal((P.N, E.e_dim))
        est = lb_norm(I_nu(E, nu, U), method="enumerate")
        QU = np.zeros_like(U)
        rows = list(P.levels[nu])
        QU[rows] = U[rows]
        ref = ambient_norm(E, QU)
        uncertified += int(not (est.exact and ref.exact))
        worst = max(worst, abs(est.lower - ref.lower), abs(est.upper - ref.upper))
    elapsed = time.perf_counter() - start
    report(1, "Lb(I_nu(u)) = ||Q^nu u||", worst <= 1e-9 and uncertified == 0 and elapsed < 30,
           f"max |diff| {worst:.2e} over 100 draws, {uncertified} uncertified, {elapsed:.1f} s")


def test_criterion_2_distinguished_element_has_norm_one():
    worst, inexact = 0.0, 0
    for p in [1, np.inf]:
        for n in range(1, 9):
            L = LpNorm(p, n)
            est = injective_norm(L, dualize(L), distinguished_w(Paving(p, n, [tuple(range(n))]), 0),
                                 method="enumerate")
            inexact += int(not (est.exact and est.lower == 1.0 and est.upper == 1.0))
    for n in range(1, 9):
        L = LpNorm(2, n)
        est = injective_norm(L, L, distinguished_w(Paving(2, n, [tuple(range(n))]), 0), method="ascent")
        worst = max(worst, abs(est.lower - 1.0))
    report(2, "||w|| = 1", inexact == 0 and worst <= 1e-6,
           f"p in {{1, inf}}, n <= 8: {16 - inexact}/16 exactly 1; p = 2 ascent max |err| {worst:.1e}")


def test_criterion_3_coproduct_norm_is_sup():
    worst, uncertified = 0.0, 0
    for i in range(100):
        rng = np.random.default_rng([3, i])
        P = random_paving(rng, max_n=4, max_levels=3)
        E = random_space(rng, P, max_e=3)
        ops = []
        for _ in range(int(rng.integers(1, 4))):
            D = random_space(rng, P, max_e=3)
            ops.append(LOperator(rng.standard_normal((E.e_dim, D.e_dim)), D, E))
        # enumeration over the sum's level balls, not the block-by-block shortcut
        whole = lb_norm(oplus_operators(ops), method="enumerate")
        parts = [lb_norm(o) for o in ops]
        sup_lo, sup_up = max(p.lower for p in parts), max(p.upper for p in parts)
        uncertified += int(not whole.exact or not all(p.exact for p in parts))
        worst = max(worst, abs(whole.lower - sup_lo), abs(whole.upper - sup_up))
    report(3, "Lb(oplus phi_i) = sup Lb(phi_i)", worst <= 1e-9 and uncertified == 0,
           f"max |diff| {worst:.2e} over 100 families, {uncertified} uncertified")


def test_criterion_4_round_trips_are_exact():
    bad = 0
    for i in range(100):
        rng = np.random.default_rng([4, i])
        P = random_paving(rng)
        E = random_space(rng, P)
        nu = int(rng.integers(0, len(P.levels)))
        dom = make_level_min_space(P, nu)
        V = rng.standard_normal((P.size(nu), E.e_dim))
        phi = LOperator(rng.standard_normal((E.e_dim, P.size(nu))), dom, E)
        ok = exact_equal(I_nu_inverse(I_nu(E, nu, V, dom=dom)).coeffs, V)
        ok &= exact_equal(I_nu(E, nu, I_nu_inverse(phi), dom=dom).matrix, phi.matrix)
        bad += int(not ok)
    report(4, "I_nu round trips", bad == 0, f"{100 - bad}/100 exact in both directions")


def test_criterion_5_contractibility():
    spaces = []
    for i in range(5):
        rng = np.random.default_rng([5, i])
        P = random_paving(rng, max_n=5, max_levels=3)
        spaces.append(("MIN", make_min_space(P, LpNorm([1, np.inf][i % 2], 2))))
        spaces.append(("l1-sum", oplus1_sum([make_min_space(P, LpNorm(1, 2)),
                                             make_min_space(P, PolytopeVertices(random_polytope(rng, 2)))])[0]))
        spaces.append(("well-composed", make_well_composed(P, [P.level_spec(nu) for nu in range(len(P.levels))])))
        spaces.append(("free", build_free_space(P, [0, 1]).instance))
    worst, failures = 0.0, []
    for label, E in spaces:
        rep = check_contractibility(E, samples=1000, seed=0)
        worst = max(worst, rep.max_violation)
        if not rep.passed:
            failures.append(label)
    # the level norm |x1| + 2|x2| fails ||a.u|| <= ||a|| ||u|| for a swap
    adversary = make_spec_space(Paving(1, 2, [(0, 1)]), 1, [PolytopeVertices([[1, 0], [0, 0.5]])])
    detected = not check_contractibility(adversary, samples=1000, seed=0).passed
    report(5, "contractibility", not failures and worst <= 1e-9 and detected,
           f"{len(spaces) - len(failures)}/{len(spaces)} instances pass, max violation {worst:.1e}, "
           f"adversary {'detected' if detected else 'missed'}")


def test_criterion_6_free_lifting_suite():
    start = time.perf_counter()
    rep = run_scenario(ScenarioConfig("free-lift-suite", seed=0, instances=50))
    elapsed = time.perf_counter() - start
    rows = rep.tables["instances"]
    good = sum(bool(r["passed"]) for r in rows)
    report(6, "lifting suite", good == 50 and rep.passed and elapsed < 60,
           f"{good}/50 exact lifts with Lb <= 1 + 1e-9, {elapsed:.1f} s")


def test_criterion_7_circle_lifting():
    rep = run_scenario(ScenarioConfig("circle-lifting", seed=0, m=64, ks=(2, 4, 8, 16)))
    sweep = {r["k"]: r["support_lower_bound"] for r in rep.tables["support_sweep"]}
    failed = [c["name"] for c in rep.checks if not c["passed"]]
    report(7, "circle lifting", rep.passed,
           f"m = 64, minimal support by k {sweep}" + (f", failed: {failed}" if failed else ""))


def test_criterion_8_polygon_gap():
    rep = run_scenario(ScenarioConfig("polygon-gap", seed=0, trials=100))
    rows = rep.tables["trials"]
    ok = sum(r["hausdorff"] >= r["bound"] - 1e-12 and r["hausdorff"] > 0 for r in rows)
    gap = min(r["hausdorff"] - r["bound"] for r in rows)
    key = {"hausdorff >= 1 - cos(pi/V') in every trial", "hausdorff > 0 in every trial"}
    checks = all(c["passed"] for c in rep.checks if c["name"] in key)
    report(8, "polygon gap", ok == 100 and checks,
           f"{ok}/100 trials with d >= 1 - cos(pi/V') and d > 0, min slack {gap:.2e}")


def test_criterion_9_row_family_norm():
    worst, uncertified = 0.0, 0
    for i in range(100):
        rng = np.random.default_rng([9, i])
        P = random_paving(rng, max_n=4, max_levels=3)
        E = random_space(rng, P, max_e=3)
        labels = list(range(int(rng.integers(1, 4))))
        f = RowFamily(E, {t: unit_rows(rng, E) for t in labels})
        a = lb_norm(I_bijection(build_free_space(P, labels), E, f))
        b = f.triple_norm()
        uncertified += int(not (a.exact and b.exact))
        worst = max(worst, abs(a.lower - b.lower), abs(a.upper - b.upper))
    report(9, "Lb(I_E(f)) = |||f|||", worst <= 1e-9 and uncertified == 0,
           f"max |diff| {worst:.2e} over 100 families, {uncertified} uncertified")


def test_criterion_10_canonical_pi():
    rng = np.random.default_rng(10)
    P = Paving(1, 4, [(0, 1), (1, 2, 3), (0, 3)])
    E = oplus1_sum([make_min_space(P, LpNorm(1, 2)), make_min_space(P, LpNorm(np.inf, 1))])[0]
    sample = [unit_rows(rng, E, scale=(0.2, 1.0)) for _ in range(20)]
    cp = canonical_pi(E, sample)
    exact = in_ball = 0
    for t, z in enumerate(sample):
        v = cp.preimage(t)
        img = cp.image_of(v)
        exact += int(all(exact_equal(img[nu], to_fractions(z[nu])) for nu in z))
        in_ball += int(max(cp.free.instance.levels[nu].evaluate(v[nu]).upper for nu in v) <= 1.0)
    report(10, "canonical pi", exact == 20 and in_ball == 20,
           f"{exact}/20 exact images, {in_ball}/20 preimages in the closed unit balls")


@pytest.fixture(autouse=True, scope="module")
def _header():
    ACCEPTANCE.clear()
    yield
