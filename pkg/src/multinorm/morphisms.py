"""Operators between L-space instances: Lb-norms, coisometry, preimages, liftings.

An ``LOperator`` stores the matrix of phi: E_dom -> E_cod.  Its action on a
level tensor V (rows indexed by L^nu) is V @ matrix.T.  Matrices produced by
the lifting solvers hold ``Fraction`` entries so that identities such as
tau @ psi == phi can be checked without tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._exact import NotInRange, exact_equal, frac_matmul, snap_to_affine, to_float, to_fractions
from ._lp import Infeasible, LinearProgram, LPError
from ._parallel import pmap
from .lspace_core import (
    LEVEL_ENUM_CAP,
    InjectiveLevel,
    LSpaceInstance,
    ScaledLevel,
    SumLevel,
    ambient_norm,
    instance_from_json,
    instance_to_json,
    oplus1_sum,
)
from .normed_core import NotPolyhedral, NormSpecError, vector_from_json
from .tensor_core import NormEstimate, TensorElement, combine_sup, operator_norm

COISOMETRY_VERTEX_CAP = 5000
FEAS_TOL = 1e-9


class LiftError(RuntimeError):
    pass


class LOperator:
    """phi: dom -> cod given by a cod.e_dim x dom.e_dim matrix."""

    def __init__(self, matrix, dom: LSpaceInstance, cod: LSpaceInstance, lb_norm_cache=None, meta=None):
        M = np.asarray(matrix)
        if M.ndim != 2 or M.shape != (cod.e_dim, dom.e_dim):
            raise ValueError(f"operator matrix shape {M.shape} does not match ({cod.e_dim}, {dom.e_dim})")
        if not dom.paving.same_as(cod.paving):
            raise NormSpecError("domain and codomain must share a paving")
        self.exact_matrix = M if M.dtype == object else None
        self.matrix = to_float(M)
        self.dom, self.cod = dom, cod
        self.lb_norm_cache = lb_norm_cache
        self.meta = meta or {}

    def __repr__(self):
        return f"LOperator({self.cod.e_dim}x{self.dom.e_dim})"

    def rational(self):
        return self.exact_matrix if self.exact_matrix is not None else to_fractions(self.matrix)

    def compose(self, other):
        """self o other."""
        if self.exact_matrix is not None or other.exact_matrix is not None:
            M = frac_matmul(self.rational(), other.rational())
        else:
            M = self.matrix @ other.matrix
        return LOperator(M, other.dom, self.cod)

    def __matmul__(self, other):
        return self.compose(other)

    def scaled(self, c):
        return LOperator(self.matrix * c, self.dom, self.cod)

    def apply_level(self, V):
        """(1 (x) phi) V for a level tensor V."""
        return np.asarray(V, dtype=float) @ self.matrix.T

    @classmethod
    def identity(cls, E):
        return cls(np.eye(E.e_dim), E, E)


def identity_operator(E):
    return LOperator.identity(E)


# ---------------------------------------------------------------------------
# Lb-norm


def _max_over(chunks, fn):
    lo = up = 0.0
    for C in chunks:
        a, b = fn(C)
        lo = max(lo, float(a.max()))
        up = max(up, float(b.max()))
    return NormEstimate.from_bounds(lo, up)


def _same_injective(D, C):
    while isinstance(D, ScaledLevel) and isinstance(C, ScaledLevel):
        if not np.array_equal(D.d, C.d):
            return None
        D, C = D.inner, C.inner
    if isinstance(D, InjectiveLevel) and isinstance(C, InjectiveLevel) and D.l_spec == C.l_spec:
        return D, C
    return None


def _sampled_level_norm(D, C, Phi, seed=0, samples=2000):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((samples, D.rows, D.e_dim))
    _, nv = D.evaluate_batch(V)
    lo, _ = C.evaluate_batch(V @ Phi.T)
    return NormEstimate(float(np.max(lo / nv)), math.inf, False)


def level_operator_norm(D, C, Phi, method="auto"):
    """sup { ||V Phi^T||_C : ||V||_D <= 1 } for level norms D (domain) and C (codomain).

    ``primal`` enumerates extreme points of the domain ball, ``dual`` those of
    the codomain dual ball; ``enumerate`` picks the cheaper of the two.  ``auto``
    additionally uses structural shortcuts: an l1-sum domain splits into its
    blocks, and a map between injective levels over the same factor has the
    Banach operator norm of the underlying matrix.
    """
    Phi = np.asarray(Phi, dtype=float)
    if not np.any(Phi):
        return NormEstimate.exact_value(0.0)
    if method == "auto":
        if isinstance(D, SumLevel):
            return combine_sup(
                level_operator_norm(p, C, Phi[:, sl], "auto") for p, sl in zip(D.parts, D._slices())
            )
        pair = _same_injective(D, C)
        if pair is not None:
            return operator_norm(Phi, pair[0].e_spec, pair[1].e_spec)
        if D is C and Phi.shape[0] == Phi.shape[1]:
            lam = Phi[0, 0]
            if np.array_equal(Phi, lam * np.eye(len(Phi))):
                return NormEstimate.exact_value(abs(lam))
    pc = D.primal_count()
    dc = C.dual_count()
    if method == "primal":
        if pc is None:
            raise NotPolyhedral("domain level has no enumerable extreme points")
        use = "primal"
    elif method == "dual":
        if dc is None:
            raise NotPolyhedral("codomain level has no enumerable dual extreme points")
        use = "dual"
    elif method in ("auto", "enumerate"):
        opts = [(n, k) for n, k in ((pc, "primal"), (dc, "dual")) if n is not None and n <= LEVEL_ENUM_CAP]
        if not opts:
            if method == "enumerate":
                raise NotPolyhedral("no enumerable side within the cap")
            return _sampled_level_norm(D, C, Phi)
        use = min(opts)[1]
    else:
        raise ValueError(f"unknown method {method!r}")
    if use == "primal":
        return _max_over(D.primal_vertices(), lambda V: C.evaluate_batch(V @ Phi.T))
    return _max_over(C.dual_vertices(), lambda Y: D.evaluate_dual_batch(Y @ Phi))


def lb_norm(phi, method="auto"):
    """||phi||_Lb = sup over levels of the level operator norm of 1 (x) phi."""
    if method == "auto" and phi.lb_norm_cache is not None:
        return phi.lb_norm_cache
    L = len(phi.dom.paving.levels)
    ests = pmap(lambda nu: level_operator_norm(phi.dom.levels[nu], phi.cod.levels[nu], phi.matrix, method),
                range(L))
    est = combine_sup(ests)
    if method == "auto":
        phi.lb_norm_cache = est
    return est


def lb_norm_by_level(phi, method="auto"):
    return [level_operator_norm(phi.dom.levels[nu], phi.cod.levels[nu], phi.matrix, method)
            for nu in range(len(phi.dom.paving.levels))]


def oplus_operators(ops, dom=None):
    """The coproduct map x -> sum_i phi_i(x_i) out of the l1-sum of the domains."""
    ops = list(ops)
    if not ops:
        raise NormSpecError("oplus_operators needs at least one operator")
    cod = ops[0].cod
    if any(o.cod.e_dim != cod.e_dim or not o.cod.paving.same_as(cod.paving) for o in ops):
        raise NormSpecError("operators must share a codomain")
    if dom is None:
        dom = oplus1_sum([o.dom for o in ops])[0]
    if dom.e_dim != sum(o.dom.e_dim for o in ops):
        raise NormSpecError("domain blocks do not match the operator family")
    if any(o.exact_matrix is not None for o in ops):
        M = np.concatenate([o.rational() for o in ops], axis=1)
    else:
        M = np.hstack([o.matrix for o in ops])
    return LOperator(M, dom, cod)


# ---------------------------------------------------------------------------
# preimages


def min_norm_preimage(tau, nu, u, zero_mask=None):
    """Minimize ||V||_nu over level tensors with (1 (x) tau) V = u.

    Polyhedral levels give an LP; other levels a cvxpy program.  The returned
    point is re-checked for feasibility and its norm recomputed from scratch.
    ``zero_mask`` (boolean, shape of V) forces the marked entries of V to zero.
    """
    G = tau.dom.levels[nu]
    T = tau.matrix
    U = u.coeffs if isinstance(u, TensorElement) else np.asarray(u, dtype=float)
    U = np.asarray(U, dtype=float)
    r = G.rows
    if U.shape != (r, tau.cod.e_dim):
        raise ValueError(f"level tensor shape {U.shape} does not match ({r}, {tau.cod.e_dim})")
    eg = tau.dom.e_dim
    if not np.any(U):
        return np.zeros((r, eg)), NormEstimate.exact_value(0.0)
    if zero_mask is not None:
        return _masked_preimage(G, T, U, np.asarray(zero_mask, dtype=bool))
    # range check first so infeasibility gets a clear message
    X, *_ = np.linalg.lstsq(T, U.T, rcond=None)
    scale = max(1.0, float(np.abs(U).max()))
    if np.abs(T @ X - U.T).max() > 1e-9 * scale:
        raise Infeasible("level tensor is not in the range of 1 (x) tau")
    if G.polyhedral():
        lp = LinearProgram()
        V = lp.add_vars(r * eg).reshape(r, eg)
        t = lp.add_vars(1, lb=0.0)[0]
        for i in range(r):
            for k in range(T.shape[0]):
                lp.add_eq(V[i], T[k], U[i, k])
        G.add_epigraph(lp, V, t)
        lp.minimize([t])
        val, x = lp.solve()
        Vx = x[V]
        solver_val, tol = val, FEAS_TOL
    else:
        import cvxpy as cp

        Vv = cp.Variable((r, eg))
        prob = cp.Problem(cp.Minimize(G.cvx(Vv)), [Vv @ T.T == U])
        prob.solve(solver=cp.CLARABEL)
        if prob.status not in ("optimal", "optimal_inaccurate"):
            raise Infeasible(f"convex preimage program ended with status {prob.status}")
        Vx = np.asarray(Vv.value)
        solver_val, tol = float(prob.value), 1e-7
    res = np.abs(Vx @ T.T - U).max()
    if res > 1e3 * tol * scale:
        raise LPError(f"preimage violates the constraint by {res:.3e}")
    est = G.evaluate(Vx)
    lower = max(0.0, min(solver_val, est.lower))
    if est.upper - lower > tol * max(1.0, lower):
        lower = est.lower
    return Vx, NormEstimate.from_bounds(lower, est.upper)


def _masked_preimage(G, T, U, mask):
    r, eg = mask.shape
    lp = LinearProgram()
    V = lp.add_vars(r * eg).reshape(r, eg)
    t = lp.add_vars(1, lb=0.0)[0]
    lp.set_bounds(V[mask], lb=0.0, ub=0.0)
    for i in range(r):
        for k in range(T.shape[0]):
            lp.add_eq(V[i], T[k], U[i, k])
    G.add_epigraph(lp, V, t)
    lp.minimize([t])
    val, x = lp.solve()
    Vx = x[V]
    Vx[mask] = 0.0
    if np.abs(Vx @ T.T - U).max() > 1e-6 * max(1.0, float(np.abs(U).max())):
        raise LPError("masked preimage violates the constraint")
    est = G.evaluate(Vx)
    return Vx, NormEstimate.from_bounds(max(0.0, min(val, est.lower)), est.upper)


@dataclass
class CoisometryVerdict:
    kind: str
    certified: bool
    witnesses: list = field(default_factory=list)
    checked: int = 0
    max_ratio: float = 0.0

    def __post_init__(self):
        if (self.kind == "neither") != bool(self.witnesses):
            raise ValueError("witnesses must be present exactly when the verdict is 'neither'")

    @property
    def passed(self):
        return self.kind != "neither"

    def to_json(self, lb=None):
        return {
            "verdict": self.kind,
            "certified": self.certified,
            "checked": self.checked,
            "max_ratio": self.max_ratio,
            "witnesses": [
                {"level": w[0], "u": np.asarray(w[1]).tolist(),
                 "min_preimage_norm": w[2] if math.isfinite(w[2]) else None}
                for w in self.witnesses
            ],
            "lb_norm": None if lb is None else lb.to_json(),
        }


def coisometry_check(tau, mode="strict", tol=1e-9, samples=64, seed=0, candidates=None):
    """Decide whether 1 (x) tau maps each level ball onto the codomain level ball.

    The minimal preimage norm is convex and homogeneous in u, so on polyhedral
    levels checking one extreme point of each symmetric pair is exact and the
    verdict is certified.  Other levels are probed on random unit-norm tensors.
    With finitely many coordinates the closed and open unit balls have the same
    preimage property, so ``mode`` only selects the label of a passing verdict.
    """
    if mode not in ("strict", "open"):
        raise ValueError("mode must be 'strict' or 'open'")
    rng = np.random.default_rng(seed)
    cod = tau.cod
    certified = candidates is None
    witnesses, checked, worst = [], 0, 0.0
    for nu in range(len(cod.paving.levels)):
        C = cod.levels[nu]
        if candidates is not None:
            pts = np.asarray(candidates.get(nu, np.zeros((0, C.rows, C.e_dim))), dtype=float)
        else:
            n = C.primal_count()
            if n is not None and n <= COISOMETRY_VERTEX_CAP:
                pts = np.concatenate(list(C.primal_vertices()))
            else:
                certified = False
                pts = rng.standard_normal((samples, C.rows, C.e_dim))
        if not len(pts):
            continue
        _, norms = C.evaluate_batch(pts)

        def one(k, nu=nu, pts=pts, norms=norms):
            if norms[k] == 0:
                return 0.0
            try:
                _, est = min_norm_preimage(tau, nu, pts[k])
            except Infeasible:
                return math.inf
            return est.upper / norms[k]

        ratios = pmap(one, range(len(pts)))
        for k, ratio in enumerate(ratios):
            checked += 1
            worst = max(worst, float(ratio))
            if ratio > 1 + tol:
                witnesses.append((nu, pts[k] / norms[k], ratio))
    kind = mode if not witnesses else "neither"
    return CoisometryVerdict(kind, certified, witnesses, checked, worst)


# ---------------------------------------------------------------------------
# liftings


def _snap_transposed(Psi, T, Phi):
    """Rational Psi' near Psi with T @ Psi' == Phi exactly."""
    return snap_to_affine(np.asarray(Psi).T, T, np.asarray(Phi).T).T


def _lift_well_composed(tau, phi):
    P = phi.dom
    Phi, T = phi.matrix, tau.matrix
    Psi = np.zeros((tau.dom.e_dim, P.e_dim))
    block_norms = []
    for b in P.registry:
        sl = slice(b.offset, b.offset + b.size)
        u = Phi[:, sl].T  # phi_infinity(w) in L^nu (x) E
        try:
            V, est = min_norm_preimage(tau, b.level, u)
        except Infeasible as exc:
            raise LiftError(f"block at offset {b.offset}: {exc}") from None
        Psi[:, sl] = V.T
        block_norms.append(est.to_json())
    return Psi, {"route": "blockwise", "block_preimage_norms": block_norms}


def _primal_points(level):
    n = level.primal_count()
    if n is None or n > LEVEL_ENUM_CAP:
        raise NotPolyhedral("domain level ball has no enumerable extreme set")
    return np.concatenate(list(level.primal_vertices()))


def _epigraph_operator_lp(dom, tgt, A, B):
    """min_R max_nu sup_{V in B(dom_nu)} ||V R^T||_{tgt_nu} subject to A R = B.

    R maps dom -> tgt (tgt.e_dim x dom.e_dim); returns (optimum, R).
    """
    eg, ed = tgt.e_dim, dom.e_dim
    lp = LinearProgram()
    R = lp.add_vars(eg * ed).reshape(eg, ed)
    t = lp.add_vars(1, lb=0.0)[0]
    for i in range(A.shape[0]):
        for j in range(ed):
            lp.add_eq(R[:, j], A[i], B[i, j])
    for nu in range(len(dom.paving.levels)):
        Gl = tgt.levels[nu]
        if not Gl.polyhedral():
            raise NotPolyhedral("target level is not polyhedral")
        for V in _primal_points(dom.levels[nu]):
            W = lp.add_vars(V.shape[0] * eg).reshape(V.shape[0], eg)
            for i in range(V.shape[0]):
                nz = np.flatnonzero(V[i])
                for g in range(eg):
                    lp.add_eq(np.append(R[g, nz], W[i, g]), np.append(V[i, nz], -1.0))
            Gl.add_epigraph(lp, W, t)
    lp.minimize([t])
    val, x = lp.solve()
    return val, x[R]


def lift(tau, phi, mode="metric", eps=1e-9, verdict=None):
    """A lifting psi: P -> G with tau psi = phi exactly.

    Well-composed domains are lifted block by block: each block phi_mu
    corresponds to the level tensor phi_mu^T, whose minimal preimage V gives the
    block V^T of psi.  Other domains go through one LP over the extreme points
    of the domain level balls.
    """
    if mode not in ("metric", "extreme"):
        raise ValueError("mode must be 'metric' or 'extreme'")
    if tau.cod.e_dim != phi.cod.e_dim or not tau.cod.paving.same_as(phi.cod.paving):
        raise NormSpecError("tau and phi must share a codomain")
    need = "strict" if mode == "metric" else "open"
    if verdict is None:
        verdict = coisometry_check(tau, need)
    if not verdict.passed:
        raise LiftError(f"tau fails the {need} coisometry check")
    phi_lb = lb_norm(phi)
    if mode == "extreme" and not phi_lb.upper < 1:
        raise LiftError("extreme mode needs lb_norm(phi) < 1")
    if phi.dom.registry is not None:
        Psi, info = _lift_well_composed(tau, phi)
    else:
        _, Psi = _epigraph_operator_lp(phi.dom, tau.dom, tau.matrix, phi.matrix)
        info = {"route": "epigraph"}
    try:
        exact = _snap_transposed(Psi, tau.matrix, phi.rational())
    except NotInRange as exc:
        raise LiftError(str(exc)) from None
    psi = LOperator(exact, phi.dom, tau.dom)
    if not exact_equal(frac_matmul(tau.rational(), psi.rational()), phi.rational()):
        raise LiftError("exact identity tau psi = phi failed")
    est = lb_norm(psi)
    bound = phi_lb.upper + eps if mode == "metric" else 1.0 + eps
    info.update({"tau_verdict": verdict.kind, "tau_certified": verdict.certified,
                 "phi_lb_norm": phi_lb.to_json(), "psi_lb_norm": est.to_json(), "bound": bound})
    if est.upper > bound:
        raise LiftError(f"lifting norm {est.upper:.12g} exceeds {bound:.12g}")
    psi.meta = info
    return psi


@dataclass
class EpsLift:
    v: TensorElement
    norm: NormEstimate
    u_norm: NormEstimate
    level: int | None
    slack: float
    trajectory: list = field(default_factory=list)


def _lift_with_level(tau, U, nu):
    G, E = tau.dom, tau.cod
    P = G.paving
    S = P.levels[nu]
    V = np.zeros((P.N, G.e_dim))
    W, _ = min_norm_preimage(tau, nu, U[list(S)])
    V[list(S)] = W
    for k in range(P.N):
        if k in S or not np.any(U[k]):
            continue
        owners = [m for m, Sm in enumerate(P.levels) if k in Sm]
        if not owners:
            raise LiftError(f"coordinate {k} lies in no level")
        mu = min(owners, key=lambda m: len(P.levels[m]))
        single = np.zeros((P.size(mu), E.e_dim))
        single[P.levels[mu].index(k)] = U[k]
        Y, _ = min_norm_preimage(tau, mu, single)
        V[k] = Y[P.levels[mu].index(k)]
    V = to_float(snap_to_affine(V, tau.matrix, U))
    return V


def eps_lift_extension(tau, u, nu=None, eps=1e-6):
    """Lift u in l_p^N (x) E through tau with ||v|| < ||u|| + eps.

    The part of u on level nu is lifted by a minimal preimage; each remaining
    row is lifted on its own through the smallest level containing it.  With
    ``nu=None`` levels are tried from smallest to largest.
    """
    U = u.coeffs if isinstance(u, TensorElement) else np.asarray(u, dtype=float)
    un = ambient_norm(tau.cod, U)
    P = tau.dom.paving
    order = [nu] if nu is not None else sorted(range(len(P.levels)), key=lambda m: (len(P.levels[m]), m))
    trajectory, best = [], None
    for m in order:
        V = _lift_with_level(tau, U, m)
        vn = ambient_norm(tau.dom, V)
        trajectory.append((m, vn.upper))
        if best is None or vn.upper < best[1].upper:
            best = (V, vn, m)
        if vn.upper < un.lower + eps:
            return EpsLift(TensorElement(V), vn, un, m, vn.upper - un.lower, trajectory)
    V, vn, m = best
    raise LiftError(f"no level gives ||v|| < ||u|| + eps (best {vn.upper:.6g} vs {un.lower:.6g})")


@dataclass
class NotFound:
    optimum: NormEstimate
    reason: str = "optimal right inverse exceeds 1 + eps"

    def __bool__(self):
        return False


def right_inverse_search(sigma, eps):
    """Right inverse rho of sigma (sigma rho = 1) minimizing ||rho||_Lb, if it is < 1 + eps."""
    S = sigma.matrix
    G, E = sigma.dom, sigma.cod
    if np.linalg.matrix_rank(S) < E.e_dim:
        raise NormSpecError("sigma is not surjective")
    val, R = _epigraph_operator_lp(E, G, S, np.eye(E.e_dim))
    exact = snap_to_affine(R.T, S, np.eye(E.e_dim)).T
    rho = LOperator(exact, E, G)
    est = lb_norm(rho)
    rho.meta = {"lp_optimum": val}
    if est.upper < 1 + eps:
        return rho
    return NotFound(NormEstimate.from_bounds(min(val, est.lower), est.upper))


# ---------------------------------------------------------------------------
# JSON


def operator_to_json(phi, with_norm=False):
    out = {"matrix": phi.matrix.tolist(), "dom": instance_to_json(phi.dom), "cod": instance_to_json(phi.cod)}
    if phi.exact_matrix is not None:
        out["matrix_exact"] = [[str(x) for x in row] for row in phi.exact_matrix]
    if with_norm:
        out["lb_norm"] = lb_norm(phi).to_json()
    return out


def operator_from_json(obj, path="operator"):
    try:
        dom = instance_from_json(obj["dom"], path + ".dom")
        cod = instance_from_json(obj["cod"], path + ".cod")
        if "matrix_exact" in obj:
            M = np.array([[Fraction(x) for x in row] for row in obj["matrix_exact"]], dtype=object)
        else:
            M = np.array([vector_from_json(r, f"{path}.matrix[{i}]") for i, r in enumerate(obj["matrix"])])
    except KeyError as exc:
        raise NormSpecError(f"{path}: missing field {exc}") from None
    try:
        return LOperator(M.reshape(cod.e_dim, dom.e_dim) if M.size == cod.e_dim * dom.e_dim else M, dom, cod)
    except ValueError as exc:
        raise NormSpecError(f"{path}: {exc}") from None
