"""Symbolic finite-dimensional norms.

A norm is described by a small tree of ``NormSpec`` nodes (``LpNorm``,
``PolytopeVertices``, ``PolytopeFacets``, ``DualOf``, ``L1Sum``).  Every node
can be evaluated, dualized, and, where the unit ball is a polytope with a
manageable vertex set, its extreme points can be listed.  Only real scalars and
balanced (symmetric) balls are supported.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._lp import LinearProgram

# 2**20 sign vectors is the desk-scale enumeration bound
SIGN_DIM_CAP = 20
ENUM_CAP = 2**20


class NormSpecError(ValueError):
    pass


@dataclass(frozen=True)
class Unavailable:
    """Returned instead of a point list when enumeration is impossible or too big."""

    reason: str

    def __bool__(self):
        return False


class NormSpec:
    dim: int

    def __eq__(self, other):
        return isinstance(other, NormSpec) and spec_to_json(self) == spec_to_json(other)

    def __hash__(self):
        return hash(repr(spec_to_json(self)))


def _as_p(p):
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity", "oo"):
            return math.inf
        p = float(Fraction(p))
    p = float(p)
    if not p >= 1:
        raise NormSpecError(f"p must lie in [1, inf], got {p}")
    return p


def conjugate_exponent(p):
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True, eq=False)
class LpNorm(NormSpec):
    p: float
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "p", _as_p(self.p))
        if int(self.dim) < 1:
            raise NormSpecError("dimension must be positive")
        object.__setattr__(self, "dim", int(self.dim))

    def __repr__(self):
        return f"LpNorm(p={self.p:g}, dim={self.dim})"


def _frozen_matrix(rows, name):
    arr = np.array([[_to_float(v) for v in row] for row in rows], dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise NormSpecError(f"{name} must be a non-empty list of vectors")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PolytopeVertices(NormSpec):
    """Unit ball = absolute convex hull of the given points."""

    vertices: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        V = _frozen_matrix(self.vertices, "vertices")
        if np.linalg.matrix_rank(V) < V.shape[1]:
            raise NormSpecError("origin is not interior to the hull (vertices do not span)")
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "dim", V.shape[1])


@dataclass(frozen=True, eq=False)
class PolytopeFacets(NormSpec):
    """Unit ball = {x : |<f, x>| <= 1 for every listed functional f}."""

    facets: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        F = _frozen_matrix(self.facets, "facets")
        if np.linalg.matrix_rank(F) < F.shape[1]:
            raise NormSpecError("facet functionals do not bound the ball")
        object.__setattr__(self, "facets", F)
        object.__setattr__(self, "dim", F.shape[1])


@dataclass(frozen=True, eq=False)
class DualOf(NormSpec):
    inner: NormSpec
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim", self.inner.dim)


@dataclass(frozen=True, eq=False)
class L1Sum(NormSpec):
    blocks: tuple
    dim: int = field(init=False)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise NormSpecError("L1Sum needs at least one block")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "dim", sum(b.dim for b in blocks))

    @property
    def offsets(self):
        return np.cumsum([0] + [b.dim for b in self.blocks])


def _to_float(v):
    if isinstance(v, str):
        return float(Fraction(v))
    return float(v)


def _check_dim(spec, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dim:
        raise NormSpecError(f"dimension mismatch: spec has dim {spec.dim}, vector has {x.shape[-1]}")
    return x


# ---------------------------------------------------------------------------
# duality


def dualize(spec):
    """Return a spec for the dual norm."""
    if isinstance(spec, LpNorm):
        return LpNorm(conjugate_exponent(spec.p), spec.dim)
    if isinstance(spec, PolytopeVertices):
        return PolytopeFacets(spec.vertices)
    if isinstance(spec, PolytopeFacets):
        return PolytopeVertices(spec.facets)
    if isinstance(spec, DualOf):
        return spec.inner
    if isinstance(spec, L1Sum):
        return DualOf(spec)
    raise NormSpecError(f"malformed spec {spec!r}")


def is_polyhedral(spec):
    if isinstance(spec, LpNorm):
        return spec.p == 1 or math.isinf(spec.p)
    if isinstance(spec, (PolytopeVertices, PolytopeFacets)):
        return True
    if isinstance(spec, DualOf):
        return is_polyhedral(spec.inner)
    if isinstance(spec, L1Sum):
        return all(is_polyhedral(b) for b in spec.blocks)
    raise NormSpecError(f"malformed spec {spec!r}")


# ---------------------------------------------------------------------------
# evaluation


def _gauge_lp(V, x):
    """min sum|lam| subject to V^T lam = x."""
    k, n = V.shape
    lp = LinearProgram()
    lam_p = lp.add_vars(k, lb=0.0)
    lam_m = lp.add_vars(k, lb=0.0)
    for j in range(n):
        lp.add_eq(np.concatenate([lam_p, lam_m]), np.concatenate([V[:, j], -V[:, j]]), x[j])
    lp.minimize(np.concatenate([lam_p, lam_m]))
    val, _ = lp.solve()
    return max(val, 0.0)


def eval_norm(spec, x):
    """Evaluate ``||x||`` for the norm described by ``spec``."""
    x = _check_dim(spec, x)
    if x.ndim != 1:
        raise NormSpecError("eval_norm expects a single vector; use eval_norm_rows")
    return float(eval_norm_rows(spec, x[None, :])[0])


def eval_norm_rows(spec, X):
    """Row-wise norms of a (k, dim) array."""
    X = np.atleast_2d(_check_dim(spec, X))
    if isinstance(spec, LpNorm):
        if spec.p == 1:
            return np.abs(X).sum(axis=1)
        if math.isinf(spec.p):
            return np.abs(X).max(axis=1)
        if spec.p == 2:
            return np.sqrt((X * X).sum(axis=1))
        return np.linalg.norm(X, ord=spec.p, axis=1)
    if isinstance(spec, PolytopeFacets):
        return np.abs(X @ spec.facets.T).max(axis=1)
    if isinstance(spec, PolytopeVertices):
        out = np.empty(len(X))
        for i, x in enumerate(X):
            # vertex test first: saves an LP for most enumeration calls
            out[i] = 0.0 if not np.any(x) else _gauge_lp(spec.vertices, x)
        return out
    if isinstance(spec, L1Sum):
        off = spec.offsets
        return sum(eval_norm_rows(b, X[:, off[i]:off[i + 1]]) for i, b in enumerate(spec.blocks))
    if isinstance(spec, DualOf):
        inner = spec.inner
        if isinstance(inner, L1Sum):
            off = inner.offsets
            return np.max(
                [eval_norm_rows(dualize(b), X[:, off[i]:off[i + 1]]) for i, b in enumerate(inner.blocks)],
                axis=0,
            )
        return eval_norm_rows(dualize(inner), X)
    raise NormSpecError(f"malformed spec {spec!r}")


# ---------------------------------------------------------------------------
# extreme points


def count_extreme_points(spec, half=False):
    """Number of points ``extreme_points`` would return, or None if unavailable."""
    if isinstance(spec, LpNorm):
        if spec.p == 1:
            n = 2 * spec.dim
        elif math.isinf(spec.p):
            if spec.dim > SIGN_DIM_CAP:
                return None
            n = 2**spec.dim
        else:
            return None
    elif isinstance(spec, PolytopeVertices):
        n = 2 * len(spec.vertices)
    elif isinstance(spec, PolytopeFacets):
        return None
    elif isinstance(spec, L1Sum):
        counts = [count_extreme_points(b) for b in spec.blocks]
        if any(c is None for c in counts):
            return None
        n = sum(counts)
    elif isinstance(spec, DualOf):
        inner = spec.inner
        if isinstance(inner, L1Sum):
            counts = [count_extreme_points(dualize(b)) for b in inner.blocks]
            if any(c is None for c in counts):
                return None
            n = math.prod(counts)
        else:
            return count_extreme_points(dualize(inner), half)
    else:
        raise NormSpecError(f"malformed spec {spec!r}")
    return n // 2 if half else n


def _sign_vectors(n, half):
    m = n - 1 if half else n
    bits = (np.arange(2**m)[:, None] >> np.arange(m - 1, -1, -1)[None, :]) & 1
    S = 1.0 - 2.0 * bits
    if half:
        S = np.hstack([np.ones((len(S), 1)), S])
    return S


def extreme_points(spec, half=False, cap=SIGN_DIM_CAP):
    """Extreme points of the unit ball, or ``Unavailable``.

    With ``half=True`` only one point of each pair ``+-v`` is returned, which is
    all a supremum of ``|<f, v>|`` needs.
    """
    if isinstance(spec, LpNorm):
        n = spec.dim
        if spec.p == 1:
            eye = np.eye(n)
            return eye if half else np.vstack([eye, -eye])
        if math.isinf(spec.p):
            if n > cap:
                return Unavailable(f"2^{n} sign vectors exceed the enumeration cap 2^{cap}")
            return _sign_vectors(n, half)
        return Unavailable(f"l_{spec.p:g} ball has no finite extreme set")
    if isinstance(spec, PolytopeVertices):
        V = np.array(spec.vertices)
        return V if half else np.vstack([V, -V])
    if isinstance(spec, PolytopeFacets):
        return Unavailable("vertices of a facet-described polytope are not enumerated")
    total = count_extreme_points(spec)
    if total is None:
        return Unavailable("a block has no enumerable extreme set")
    if total > ENUM_CAP:
        return Unavailable(f"{total} extreme points exceed the cap {ENUM_CAP}")
    if isinstance(spec, L1Sum):
        off = spec.offsets
        parts = []
        for i, b in enumerate(spec.blocks):
            P = extreme_points(b, half=half, cap=cap)
            Z = np.zeros((len(P), spec.dim))
            Z[:, off[i]:off[i + 1]] = P
            parts.append(Z)
        return np.vstack(parts)
    if isinstance(spec, DualOf):
        inner = spec.inner
        if isinstance(inner, L1Sum):
            # the dual ball of an l1-sum is the product of the block dual balls
            sets = [extreme_points(dualize(b), cap=cap) for b in inner.blocks]
            if half:
                sets[0] = extreme_points(dualize(inner.blocks[0]), half=True, cap=cap)
            return np.array([np.concatenate(c) for c in itertools.product(*sets)])
        return extreme_points(dualize(inner), half=half, cap=cap)
    raise NormSpecError(f"malformed spec {spec!r}")


# ---------------------------------------------------------------------------
# maximizers


def _lex_smallest(cands):
    order = np.lexsort(cands.T[::-1])
    return cands[order[0]]


def ball_maximizer(spec, c):
    """A point x of the closed unit ball with <c, x> = ||c||_* (the dual norm)."""
    c = _check_dim(spec, c)
    n = spec.dim
    if isinstance(spec, LpNorm):
        p = spec.p
        if p == 1:
            i = int(np.argmax(np.abs(c)))
            x = np.zeros(n)
            x[i] = 1.0 if c[i] >= 0 else -1.0
            return x
        if math.isinf(p):
            return np.where(c >= 0, 1.0, -1.0)
        q = conjugate_exponent(p)
        nq = np.linalg.norm(c, ord=q)
        if nq == 0:
            x = np.zeros(n)
            x[0] = 1.0
            return x
        return np.sign(c) * (np.abs(c) / nq) ** (q - 1)
    if isinstance(spec, PolytopeVertices):
        V = np.vstack([spec.vertices, -spec.vertices])
        vals = V @ c
        best = vals.max()
        tol = 1e-12 * max(1.0, abs(best))
        return _lex_smallest(V[vals >= best - tol])
    if isinstance(spec, PolytopeFacets):
        F = spec.facets
        lp = LinearProgram()
        x = lp.add_vars(n)
        for f in F:
            lp.add_le(x, f, 1.0)
            lp.add_le(x, -f, 1.0)
        lp.minimize(x, -c)
        _, sol = lp.solve()
        return sol[x]
    if isinstance(spec, L1Sum):
        off = spec.offsets
        duals = [eval_norm(dualize(b), c[off[i]:off[i + 1]]) for i, b in enumerate(spec.blocks)]
        i = int(np.argmax(duals))
        x = np.zeros(n)
        x[off[i]:off[i + 1]] = ball_maximizer(spec.blocks[i], c[off[i]:off[i + 1]])
        return x
    if isinstance(spec, DualOf):
        return norming_functional(spec.inner, c)
    raise NormSpecError(f"malformed spec {spec!r}")


def norming_functional(spec, x):
    """A functional g with ||g||_* <= 1 and <g, x> = ||x||."""
    x = _check_dim(spec, x)
    if isinstance(spec, DualOf):
        return ball_maximizer(spec.inner, x)
    if isinstance(spec, L1Sum):
        off = spec.offsets
        return np.concatenate(
            [norming_functional(b, x[off[i]:off[i + 1]]) for i, b in enumerate(spec.blocks)]
        )
    return ball_maximizer(dualize(spec), x)


def ball_maximizer_rows(spec, C):
    """Row-wise ``ball_maximizer``; vectorized for l_p norms."""
    C = np.atleast_2d(C)
    if isinstance(spec, LpNorm):
        p = spec.p
        if p == 1:
            idx = np.argmax(np.abs(C), axis=1)
            X = np.zeros_like(C)
            rows = np.arange(len(C))
            X[rows, idx] = np.where(C[rows, idx] >= 0, 1.0, -1.0)
            return X
        if math.isinf(p):
            return np.where(C >= 0, 1.0, -1.0)
        q = conjugate_exponent(p)
        nq = np.linalg.norm(C, ord=q, axis=1, keepdims=True)
        safe = np.where(nq == 0, 1.0, nq)
        X = np.sign(C) * (np.abs(C) / safe) ** (q - 1)
        X[nq[:, 0] == 0] = np.eye(spec.dim)[0]
        return X
    return np.array([ball_maximizer(spec, c) for c in C])


# ---------------------------------------------------------------------------
# LP / convex representations


class NotPolyhedral(NormSpecError):
    pass


def add_norm_epigraph(lp, spec, x_idx, t_idx):
    """Add linear constraints encoding ``||x|| <= t`` to ``lp``."""
    x_idx = np.asarray(x_idx)
    n = spec.dim
    if isinstance(spec, LpNorm):
        if spec.p == 1:
            a = lp.add_vars(n, lb=0.0)
            for j in range(n):
                lp.add_le([x_idx[j], a[j]], [1.0, -1.0])
                lp.add_le([x_idx[j], a[j]], [-1.0, -1.0])
            lp.add_le(np.append(a, t_idx), np.append(np.ones(n), -1.0))
            return
        if math.isinf(spec.p):
            for j in range(n):
                lp.add_le([x_idx[j], t_idx], [1.0, -1.0])
                lp.add_le([x_idx[j], t_idx], [-1.0, -1.0])
            return
        raise NotPolyhedral(f"l_{spec.p:g} is not polyhedral")
    if isinstance(spec, PolytopeFacets):
        for f in spec.facets:
            lp.add_le(np.append(x_idx, t_idx), np.append(f, -1.0))
            lp.add_le(np.append(x_idx, t_idx), np.append(-f, -1.0))
        return
    if isinstance(spec, PolytopeVertices):
        V = spec.vertices
        k = len(V)
        lam = lp.add_vars(2 * k, lb=0.0)
        Vpm = np.vstack([V, -V])
        for j in range(n):
            lp.add_eq(np.append(lam, x_idx[j]), np.append(Vpm[:, j], -1.0))
        lp.add_le(np.append(lam, t_idx), np.append(np.ones(2 * k), -1.0))
        return
    if isinstance(spec, L1Sum):
        off = spec.offsets
        ts = lp.add_vars(len(spec.blocks), lb=0.0)
        for i, b in enumerate(spec.blocks):
            add_norm_epigraph(lp, b, x_idx[off[i]:off[i + 1]], ts[i])
        lp.add_le(np.append(ts, t_idx), np.append(np.ones(len(ts)), -1.0))
        return
    if isinstance(spec, DualOf):
        inner = spec.inner
        if isinstance(inner, L1Sum):
            off = inner.offsets
            for i, b in enumerate(inner.blocks):
                add_norm_epigraph(lp, dualize(b), x_idx[off[i]:off[i + 1]], t_idx)
            return
        add_norm_epigraph(lp, dualize(inner), x_idx, t_idx)
        return
    raise NormSpecError(f"malformed spec {spec!r}")


def cvx_norm(spec, x):
    """cvxpy expression for ``||x||`` (x a cvxpy vector expression)."""
    import cvxpy as cp

    if isinstance(spec, LpNorm):
        return cp.norm(x, spec.p if not math.isinf(spec.p) else "inf")
    if isinstance(spec, PolytopeFacets):
        return cp.max(cp.abs(spec.facets @ x))
    if isinstance(spec, L1Sum):
        off = spec.offsets
        return sum(cvx_norm(b, x[off[i]:off[i + 1]]) for i, b in enumerate(spec.blocks))
    if isinstance(spec, DualOf):
        inner = spec.inner
        if isinstance(inner, L1Sum):
            off = inner.offsets
            return cp.max(cp.hstack(
                [cvx_norm(dualize(b), x[off[i]:off[i + 1]]) for i, b in enumerate(inner.blocks)]
            ))
        return cvx_norm(dualize(inner), x)
    raise NotPolyhedral(f"no cvxpy form for {spec!r}; use add_norm_epigraph")


# ---------------------------------------------------------------------------
# Auerbach bases


@dataclass(frozen=True)
class AuerbachBasis:
    primal: np.ndarray  # columns e_k
    dual: np.ndarray  # rows e_k^*
    determinant: float
    sweeps: int
    converged: bool

    def biorthogonality_error(self):
        return float(np.abs(self.dual @ self.primal - np.eye(len(self.dual))).max())


def _det_maximizer(spec, c):
    """argmax of |<c, x>| over the unit ball, lexicographic tie-break on vertices."""
    pts = extreme_points(spec)
    if not isinstance(pts, Unavailable):
        vals = np.abs(pts @ c)
        best = vals.max()
        tol = 1e-12 * max(1.0, best)
        return _lex_smallest(pts[vals >= best - tol])
    return ball_maximizer(spec, c)


def auerbach_basis(spec, max_sweeps=200, rtol=1e-12):
    """Auerbach basis by coordinate ascent on |det|.

    Each step replaces one basis vector by a unit vector maximizing the
    determinant with the others fixed; that maximum is the dual norm of the
    corresponding cofactor row.  At a coordinate-wise maximum every dual
    functional has norm at most one.
    """
    n = spec.dim
    if n > 50:
        raise NormSpecError("auerbach_basis supports dim <= 50")
    if isinstance(spec, LpNorm):
        eye = np.eye(n)
        return AuerbachBasis(eye, eye.copy(), 1.0, 0, True)

    B = np.eye(n)
    B = B / eval_norm_rows(spec, B.T)[None, :]
    det = abs(np.linalg.det(B))
    converged = False
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        start = det
        for k in range(n):
            cof = np.linalg.det(B) * np.linalg.inv(B)[k]
            x = _det_maximizer(spec, cof)
            x = x / eval_norm(spec, x)
            trial = B.copy()
            trial[:, k] = x
            new = abs(np.linalg.det(trial))
            if new >= det * (1 - 1e-14):
                B, det = trial, max(det, new)
        if det - start <= rtol * start:
            converged = True
            break
    D = np.linalg.inv(B)
    return AuerbachBasis(B, D, float(det), sweeps, converged)


# ---------------------------------------------------------------------------
# JSON


def _fmt_p(p):
    return "inf" if math.isinf(p) else (int(p) if float(p).is_integer() else p)


def spec_to_json(spec):
    if isinstance(spec, LpNorm):
        return {"kind": "lp", "p": _fmt_p(spec.p), "dim": spec.dim}
    if isinstance(spec, PolytopeVertices):
        return {"kind": "poly_v", "vertices": spec.vertices.tolist()}
    if isinstance(spec, PolytopeFacets):
        return {"kind": "poly_f", "facets": spec.facets.tolist()}
    if isinstance(spec, DualOf):
        return {"kind": "dual", "inner": spec_to_json(spec.inner)}
    if isinstance(spec, L1Sum):
        return {"kind": "l1sum", "blocks": [spec_to_json(b) for b in spec.blocks]}
    raise NormSpecError(f"malformed spec {spec!r}")


def spec_from_json(obj, path="spec"):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise NormSpecError(f"{path}: expected an object with a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "lp":
            return LpNorm(obj["p"], obj["dim"])
        if kind == "poly_v":
            return PolytopeVertices(obj["vertices"])
        if kind == "poly_f":
            return PolytopeFacets(obj["facets"])
        if kind == "dual":
            return DualOf(spec_from_json(obj["inner"], path + ".inner"))
        if kind == "l1sum":
            return L1Sum(tuple(spec_from_json(b, f"{path}.blocks[{i}]") for i, b in enumerate(obj["blocks"])))
    except KeyError as exc:
        raise NormSpecError(f"{path}: missing field {exc}") from None
    raise NormSpecError(f"{path}: unknown kind {kind!r}")


def vector_from_json(values, path="vector"):
    try:
        return np.array([_to_float(v) for v in values], dtype=float)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise NormSpecError(f"{path}: {exc}") from None
