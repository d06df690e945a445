"""Pavings, per-level tensor norms and the L-space instances built from them.

A ``Paving`` is the base space l_p^N with a list of coordinate levels.  An
``LSpaceInstance`` attaches to every level a ``LevelNorm``: a norm on the
|S| x e_dim coefficient matrices of L^nu (x) E.  Level norms know how to
evaluate themselves and their duals in batches, how to list the extreme points
of their primal and dual balls (when that is finite and small), and how to
write themselves into a linear program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._lp import LinearProgram
from .normed_core import (
    LpNorm,
    NormSpec,
    NormSpecError,
    NotPolyhedral,
    PolytopeVertices,
    Unavailable,
    add_norm_epigraph,
    conjugate_exponent,
    count_extreme_points,
    cvx_norm,
    dualize,
    eval_norm_rows,
    extreme_points,
    is_polyhedral,
    spec_from_json,
    spec_to_json,
)
from .tensor_core import NormEstimate, TensorElement, combine_sup, injective_norm, operator_norm

LEVEL_ENUM_CAP = 2_000_000
_BATCH_ELEMS = 1 << 20


# ---------------------------------------------------------------------------
# paving


@dataclass(frozen=True, eq=False)
class Paving:
    """Base space l_p^N with coordinate levels S_nu (0-based index tuples)."""

    p: float
    N: int
    levels: tuple
    weights: np.ndarray | None = None

    def __post_init__(self):
        p = LpNorm(self.p, 1).p
        object.__setattr__(self, "p", p)
        N = int(self.N)
        if N < 1:
            raise NormSpecError("paving needs N >= 1")
        object.__setattr__(self, "N", N)
        levels = []
        for S in self.levels:
            S = tuple(sorted(int(i) for i in S))
            if not S or len(set(S)) != len(S) or S[0] < 0 or S[-1] >= N:
                raise NormSpecError(f"bad level {S} for N={N}")
            levels.append(S)
        if not levels:
            raise NormSpecError("paving needs at least one level")
        if len(set(levels)) != len(levels):
            raise NormSpecError("duplicate levels")
        object.__setattr__(self, "levels", tuple(levels))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (N,) or np.any(w <= 0):
                raise NormSpecError("weights must be N positive numbers")
            if np.all(w == 1.0):
                w = None
            object.__setattr__(self, "weights", w)

    @property
    def properly_presented(self):
        # full index set is itself a level, so Q = identity is available
        return tuple(range(self.N)) in self.levels

    def size(self, nu):
        return len(self.levels[nu])

    def row_scale(self, nu):
        """d with ||xi||_{L^nu} = ||d * xi||_p."""
        S = list(self.levels[nu])
        if self.weights is None or math.isinf(self.p):
            return np.ones(len(S))
        return self.weights[S] ** (1.0 / self.p)

    def level_spec(self, nu):
        d = self.row_scale(nu)
        r = len(d)
        if np.all(d == 1.0):
            return LpNorm(self.p, r)
        if self.p == 1:
            return PolytopeVertices(np.diag(1.0 / d))
        raise NormSpecError("weighted levels have a symbolic norm only for p in {1, inf}")

    def base_spec(self):
        if self.weights is None or math.isinf(self.p):
            return LpNorm(self.p, self.N)
        if self.p == 1:
            return PolytopeVertices(np.diag(1.0 / self.weights))
        raise NormSpecError("weighted base has a symbolic norm only for p in {1, inf}")

    def projection(self, nu):
        Q = np.zeros((self.N, self.N))
        S = list(self.levels[nu])
        Q[S, S] = 1.0
        return Q

    def restrict(self, nu, U):
        return np.asarray(U)[list(self.levels[nu])]

    def extend(self, nu, V):
        V = np.asarray(V)
        out = np.zeros((self.N,) + V.shape[1:], dtype=V.dtype)
        if V.dtype == object:
            out[...] = 0
        out[list(self.levels[nu])] = V
        return out

    def index_of(self, S):
        S = tuple(sorted(S))
        return self.levels.index(S)

    def same_as(self, other):
        return paving_to_json(self) == paving_to_json(other)

    def base_operator_norm(self, a, mu, nu):
        """||a|| : L^mu -> L^nu for an r_nu x r_mu matrix."""
        a = np.asarray(a, dtype=float)
        a = self.row_scale(nu)[:, None] * a / self.row_scale(mu)[None, :]
        return operator_norm(a, LpNorm(self.p, a.shape[1]), LpNorm(self.p, a.shape[0]))


def paving_to_json(P):
    out = {"p": "inf" if math.isinf(P.p) else (int(P.p) if float(P.p).is_integer() else P.p),
           "N": P.N, "levels": [list(S) for S in P.levels]}
    if P.weights is not None:
        out["weights"] = P.weights.tolist()
    return out


def paving_from_json(obj, path="paving"):
    try:
        return Paving(obj["p"], obj["N"], obj["levels"], obj.get("weights"))
    except KeyError as exc:
        raise NormSpecError(f"{path}: missing field {exc}") from None


# ---------------------------------------------------------------------------
# chunked vertex helpers


def _embed_rows(P, rows, e_dim, row_idx=None, col_slice=None):
    """Place a (k, a) point set into (k, rows, e_dim) tensors."""
    k = len(P)
    out = np.zeros((k, rows, e_dim))
    if row_idx is not None:
        out[:, row_idx, :] = P
    else:
        out[:, :, col_slice] = P.reshape(k, rows, -1)
    return out


def _product_chunks(sets, half_first, chunk):
    """Sums of one member from each embedded set (disjoint supports)."""
    sets = list(sets)
    if half_first:
        sets[0] = sets[0][: len(sets[0]) // 2] if sets[0] is not None else None
    shape = tuple(len(s) for s in sets)
    total = math.prod(shape)
    for s in range(0, total, chunk):
        idx = np.unravel_index(np.arange(s, min(total, s + chunk)), shape)
        yield sum(S[i] for S, i in zip(sets, idx))


def _half_points(spec):
    H = extreme_points(spec, half=True)
    return None if isinstance(H, Unavailable) else H


def _points_full(spec):
    """Extreme points ordered as [H; -H] with H a half set."""
    H = _half_points(spec)
    return None if H is None else np.vstack([H, -H])


def _chunk_for(count_per, size):
    return max(1, _BATCH_ELEMS // max(1, count_per * size))


# ---------------------------------------------------------------------------
# level norms


class LevelNorm:
    rows: int
    e_dim: int

    # batch evaluation returns (lower, upper) arrays
    def evaluate_batch(self, Us):
        raise NotImplementedError

    def evaluate_dual_batch(self, Ys):
        raise NotImplementedError

    def evaluate(self, U):
        lo, up = self.evaluate_batch(np.asarray(U, dtype=float)[None])
        return NormEstimate.from_bounds(lo[0], up[0])

    def evaluate_dual(self, Y):
        lo, up = self.evaluate_dual_batch(np.asarray(Y, dtype=float)[None])
        return NormEstimate.from_bounds(lo[0], up[0])

    def primal_count(self):
        """Number of half-symmetric primal extreme candidates, or None."""
        return None

    def primal_vertices(self, chunk=4096):
        raise NotPolyhedral("primal extreme points unavailable")

    def dual_count(self):
        return None

    def dual_vertices(self, chunk=4096):
        raise NotPolyhedral("dual extreme points unavailable")

    def polyhedral(self):
        return False

    def add_epigraph(self, lp, u_idx, t_idx):
        raise NotPolyhedral(f"{type(self).__name__} has no LP form")

    def cvx(self, U):
        raise NotPolyhedral(f"{type(self).__name__} has no cvxpy form")

    def _check(self, Us):
        Us = np.asarray(Us, dtype=float)
        if Us.ndim == 2:
            Us = Us[None]
        if Us.shape[1:] != (self.rows, self.e_dim):
            raise ValueError(f"level tensor shape {Us.shape[1:]} != ({self.rows}, {self.e_dim})")
        return Us


def _norm_over_axis(spec, W, axis):
    """Norm along ``axis`` of a 3-d array, flattened through eval_norm_rows."""
    W = np.moveaxis(W, axis, -1)
    shp = W.shape[:-1]
    return eval_norm_rows(spec, W.reshape(-1, W.shape[-1])).reshape(shp)


class InjectiveLevel(LevelNorm):
    """Injective tensor norm on l (x) e: sup of f^T U g over unit functionals."""

    def __init__(self, l_spec: NormSpec, e_spec: NormSpec):
        self.l_spec, self.e_spec = l_spec, e_spec
        self.rows, self.e_dim = l_spec.dim, e_spec.dim
        self.ld, self.ed = dualize(l_spec), dualize(e_spec)
        self._F = _half_points(self.ld)
        self._G = _half_points(self.ed)

    def __repr__(self):
        return f"InjectiveLevel({self.l_spec!r}, {self.e_spec!r})"

    def polyhedral(self):
        return is_polyhedral(self.l_spec) and is_polyhedral(self.e_spec)

    def evaluate_batch(self, Us):
        Us = self._check(Us)
        K = len(Us)
        F, G = self._F, self._G
        use_f = F is not None and (G is None or len(F) * self.e_dim <= len(G) * self.rows)
        if F is None and G is None:
            if all(isinstance(s, LpNorm) and s.p == 2 for s in (self.l_spec, self.e_spec)):
                v = np.linalg.norm(Us, 2, axis=(1, 2))
                return v, v.copy()
            ests = [injective_norm(self.l_spec, self.e_spec, U) for U in Us]
            return np.array([e.lower for e in ests]), np.array([e.upper for e in ests])
        out = np.empty(K)
        if use_f:
            step = _chunk_for(len(F), self.e_dim)
            for s in range(0, K, step):
                W = np.einsum("cr,kre->kce", F, Us[s:s + step])
                out[s:s + step] = _norm_over_axis(self.e_spec, W, 2).max(axis=1)
        else:
            step = _chunk_for(len(G), self.rows)
            for s in range(0, K, step):
                W = np.einsum("kre,ce->krc", Us[s:s + step], G)
                out[s:s + step] = _norm_over_axis(self.l_spec, W, 1).max(axis=1)
        return out, out.copy()

    def evaluate_dual_batch(self, Ys):
        # projective norm on l* (x) e*
        Ys = self._check(Ys)
        ld, ed = self.ld, self.ed
        if isinstance(ld, LpNorm) and ld.p == 1:
            v = _norm_over_axis(ed, Ys, 2).sum(axis=1)
            return v, v.copy()
        if isinstance(ed, LpNorm) and ed.p == 1:
            v = _norm_over_axis(ld, Ys, 1).sum(axis=1)
            return v, v.copy()
        if self.rows == 1:
            c = float(eval_norm_rows(ld, np.ones((1, 1)))[0])
            v = c * eval_norm_rows(ed, Ys[:, 0, :])
            return v, v.copy()
        if self.e_dim == 1:
            c = float(eval_norm_rows(ed, np.ones((1, 1)))[0])
            v = c * eval_norm_rows(ld, Ys[:, :, 0])
            return v, v.copy()
        if isinstance(ld, LpNorm) and isinstance(ed, LpNorm) and ld.p == 2 and ed.p == 2:
            v = np.linalg.norm(Ys, "nuc", axis=(1, 2))
            return v, v.copy()
        if self._F is not None and is_polyhedral(ed):
            v = np.array([self._projective_lp(Y) for Y in Ys])
            return v, v.copy()
        raise NotPolyhedral("projective norm of this pair is not implemented")

    def _projective_lp(self, Y):
        # min sum_k ||b_k||_{e*} subject to sum_k f_k (x) b_k = Y, f_k half extreme set of B(l*)
        F = self._F
        lp = LinearProgram()
        B = lp.add_vars(len(F) * self.e_dim).reshape(len(F), self.e_dim)
        ts = lp.add_vars(len(F), lb=0.0)
        for k in range(len(F)):
            add_norm_epigraph(lp, self.ed, B[k], ts[k])
        for i in range(self.rows):
            for j in range(self.e_dim):
                lp.add_eq(B[:, j], F[:, i], Y[i, j])
        lp.minimize(ts)
        val, _ = lp.solve()
        return max(0.0, val)

    def primal_count(self):
        r, n = self.rows, self.e_dim
        ne = count_extreme_points(self.e_spec)
        nl = count_extreme_points(self.l_spec)
        if r == 1 and ne is not None:
            return ne // 2
        if n == 1 and nl is not None:
            return nl // 2
        if isinstance(self.ld, LpNorm) and self.ld.p == 1 and ne is not None:
            return ne**r // 2
        if isinstance(self.ed, LpNorm) and self.ed.p == 1 and nl is not None:
            return nl**n // 2
        return None

    def primal_vertices(self, chunk=4096):
        r, n = self.rows, self.e_dim
        if self.primal_count() is None:
            raise NotPolyhedral("primal extreme points unavailable")
        # same branch order as primal_count
        if r == 1 and count_extreme_points(self.e_spec) is not None:
            c = float(eval_norm_rows(self.l_spec, np.ones((1, 1)))[0])
            P = extreme_points(self.e_spec, half=True) / c
            yield P[:, None, :]
            return
        if n == 1 and count_extreme_points(self.l_spec) is not None:
            c = float(eval_norm_rows(self.e_spec, np.ones((1, 1)))[0])
            P = extreme_points(self.l_spec, half=True) / c
            yield P[:, :, None]
            return
        if isinstance(self.ld, LpNorm) and self.ld.p == 1:
            # product of row balls
            P = _points_full(self.e_spec)
            sets = [_embed_rows(P, r, n, row_idx=i) for i in range(r)]
        else:
            # product of column balls
            P = _points_full(self.l_spec)
            sets = []
            for j in range(n):
                S = np.zeros((len(P), r, n))
                S[:, :, j] = P
                sets.append(S)
        yield from _product_chunks(sets, True, chunk)

    def dual_count(self):
        if self._F is None or self._G is None:
            return None
        return len(self._F) * 2 * len(self._G)

    def dual_vertices(self, chunk=4096):
        if self.dual_count() is None:
            raise NotPolyhedral("dual extreme points unavailable")
        F, G = self._F, np.vstack([self._G, -self._G])
        total = len(F) * len(G)
        for s in range(0, total, chunk):
            i, j = np.divmod(np.arange(s, min(total, s + chunk)), len(G))
            yield F[i][:, :, None] * G[j][:, None, :]

    def add_epigraph(self, lp, u_idx, t_idx):
        u_idx = np.asarray(u_idx)
        F, G = self._F, self._G
        if not (is_polyhedral(self.l_spec) and is_polyhedral(self.e_spec)):
            raise NotPolyhedral("injective level over a non-polyhedral factor")
        if G is not None and (F is None or len(G) <= len(F)):
            for g in G:
                y = lp.add_vars(self.rows)
                for i in range(self.rows):
                    lp.add_eq(np.append(u_idx[i], y[i]), np.append(g, -1.0))
                add_norm_epigraph(lp, self.l_spec, y, t_idx)
        elif F is not None:
            for f in F:
                y = lp.add_vars(self.e_dim)
                for j in range(self.e_dim):
                    lp.add_eq(np.append(u_idx[:, j], y[j]), np.append(f, -1.0))
                add_norm_epigraph(lp, self.e_spec, y, t_idx)
        else:
            raise NotPolyhedral("no enumerable side for the LP form")

    def cvx(self, U):
        import cvxpy as cp

        if all(isinstance(s, LpNorm) and s.p == 2 for s in (self.l_spec, self.e_spec)):
            return cp.sigma_max(U)
        if self._G is not None:
            return cp.max(cp.hstack([cvx_norm(self.l_spec, U @ g) for g in self._G]))
        if self._F is not None:
            return cp.max(cp.hstack([cvx_norm(self.e_spec, U.T @ f) for f in self._F]))
        raise NotPolyhedral("no cvxpy form for this injective level")


class SumLevel(LevelNorm):
    """l1-sum over column blocks: ||U|| = sum_b ||U_b||_b."""

    def __init__(self, parts):
        self.parts = list(parts)
        if not self.parts:
            raise NormSpecError("empty l1-sum")
        self.rows = self.parts[0].rows
        if any(p.rows != self.rows for p in self.parts):
            raise NormSpecError("l1-sum parts disagree on level size")
        self.offsets = np.cumsum([0] + [p.e_dim for p in self.parts])
        self.e_dim = int(self.offsets[-1])

    def __repr__(self):
        return f"SumLevel({self.parts!r})"

    def _slices(self):
        return [slice(self.offsets[i], self.offsets[i + 1]) for i in range(len(self.parts))]

    def polyhedral(self):
        return all(p.polyhedral() for p in self.parts)

    def evaluate_batch(self, Us):
        Us = self._check(Us)
        lo = np.zeros(len(Us))
        up = np.zeros(len(Us))
        for p, sl in zip(self.parts, self._slices()):
            a, b = p.evaluate_batch(Us[:, :, sl])
            lo += a
            up += b
        return lo, up

    def evaluate_dual_batch(self, Ys):
        Ys = self._check(Ys)
        res = [p.evaluate_dual_batch(Ys[:, :, sl]) for p, sl in zip(self.parts, self._slices())]
        return np.max([r[0] for r in res], axis=0), np.max([r[1] for r in res], axis=0)

    def primal_count(self):
        counts = [p.primal_count() for p in self.parts]
        return None if any(c is None for c in counts) else sum(counts)

    def primal_vertices(self, chunk=4096):
        if self.primal_count() is None:
            raise NotPolyhedral("primal extreme points unavailable")
        for p, sl in zip(self.parts, self._slices()):
            for V in p.primal_vertices(chunk):
                out = np.zeros((len(V), self.rows, self.e_dim))
                out[:, :, sl] = V
                yield out

    def dual_count(self):
        counts = [p.dual_count() for p in self.parts]
        if any(c is None for c in counts):
            return None
        return math.prod(counts) * 2 ** (len(counts) - 1)

    def dual_vertices(self, chunk=4096):
        if self.dual_count() is None:
            raise NotPolyhedral("dual extreme points unavailable")
        sets = []
        for b, (p, sl) in enumerate(zip(self.parts, self._slices())):
            H = np.concatenate(list(p.dual_vertices(chunk=1 << 30)))
            full = H if b == 0 else np.concatenate([H, -H])
            S = np.zeros((len(full), self.rows, self.e_dim))
            S[:, :, sl] = full
            sets.append(S)
        yield from _product_chunks(sets, False, chunk)

    def add_epigraph(self, lp, u_idx, t_idx):
        u_idx = np.asarray(u_idx)
        ts = lp.add_vars(len(self.parts), lb=0.0)
        for k, (p, sl) in enumerate(zip(self.parts, self._slices())):
            p.add_epigraph(lp, u_idx[:, sl], ts[k])
        lp.add_le(np.append(ts, t_idx), np.append(np.ones(len(ts)), -1.0))

    def cvx(self, U):
        return sum(p.cvx(U[:, sl]) for p, sl in zip(self.parts, self._slices()))


class BochnerLevel(LevelNorm):
    """l_p(E) over the level rows: (sum_i ||U_i||_E^p)^(1/p)."""

    def __init__(self, p, rows, e_spec):
        self.p = LpNorm(p, 1).p
        self.rows, self.e_dim = int(rows), e_spec.dim
        self.e_spec, self.ed = e_spec, dualize(e_spec)

    def __repr__(self):
        return f"BochnerLevel(p={self.p:g}, rows={self.rows}, {self.e_spec!r})"

    def polyhedral(self):
        return (self.p == 1 or math.isinf(self.p)) and is_polyhedral(self.e_spec)

    @staticmethod
    def _combine(R, p):
        if p == 1:
            return R.sum(axis=1)
        if math.isinf(p):
            return R.max(axis=1)
        return (R**p).sum(axis=1) ** (1.0 / p)

    def evaluate_batch(self, Us):
        Us = self._check(Us)
        v = self._combine(_norm_over_axis(self.e_spec, Us, 2), self.p)
        return v, v.copy()

    def evaluate_dual_batch(self, Ys):
        Ys = self._check(Ys)
        v = self._combine(_norm_over_axis(self.ed, Ys, 2), conjugate_exponent(self.p))
        return v, v.copy()

    def _union_count(self, spec):
        n = count_extreme_points(spec, half=True)
        return None if n is None else self.rows * n

    def _product_count(self, spec):
        n = count_extreme_points(spec)
        return None if n is None else n**self.rows // 2

    def primal_count(self):
        if self.p == 1:
            return self._union_count(self.e_spec)
        if math.isinf(self.p):
            return self._product_count(self.e_spec)
        return None

    def dual_count(self):
        if self.p == 1:
            return self._product_count(self.ed)
        if math.isinf(self.p):
            return self._union_count(self.ed)
        return None

    def _union(self, spec):
        H = extreme_points(spec, half=True)
        yield np.concatenate([_embed_rows(H, self.rows, self.e_dim, row_idx=i) for i in range(self.rows)])

    def _product(self, spec, chunk):
        P = _points_full(spec)
        sets = [_embed_rows(P, self.rows, self.e_dim, row_idx=i) for i in range(self.rows)]
        yield from _product_chunks(sets, True, chunk)

    def primal_vertices(self, chunk=4096):
        if self.primal_count() is None:
            raise NotPolyhedral("primal extreme points unavailable")
        return self._union(self.e_spec) if self.p == 1 else self._product(self.e_spec, chunk)

    def dual_vertices(self, chunk=4096):
        if self.dual_count() is None:
            raise NotPolyhedral("dual extreme points unavailable")
        return self._product(self.ed, chunk) if self.p == 1 else self._union(self.ed)

    def add_epigraph(self, lp, u_idx, t_idx):
        u_idx = np.asarray(u_idx)
        if self.p == 1:
            ts = lp.add_vars(self.rows, lb=0.0)
            for i in range(self.rows):
                add_norm_epigraph(lp, self.e_spec, u_idx[i], ts[i])
            lp.add_le(np.append(ts, t_idx), np.append(np.ones(self.rows), -1.0))
        elif math.isinf(self.p):
            for i in range(self.rows):
                add_norm_epigraph(lp, self.e_spec, u_idx[i], t_idx)
        else:
            raise NotPolyhedral("Bochner level with 1 < p < inf")

    def cvx(self, U):
        import cvxpy as cp

        r = cp.hstack([cvx_norm(self.e_spec, U[i, :]) for i in range(self.rows)])
        return cp.norm(r, "inf" if math.isinf(self.p) else self.p)


class SpecLevel(LevelNorm):
    """Arbitrary NormSpec on vec(U), columns stacked (column-major)."""

    def __init__(self, spec, rows, e_dim):
        if spec.dim != rows * e_dim:
            raise NormSpecError(f"level spec has dim {spec.dim}, expected {rows * e_dim}")
        self.spec, self.rows, self.e_dim = spec, int(rows), int(e_dim)
        self.sd = dualize(spec)

    def __repr__(self):
        return f"SpecLevel({self.spec!r})"

    def _vec(self, Us):
        return Us.transpose(0, 2, 1).reshape(len(Us), -1)

    def _unvec(self, P):
        return P.reshape(len(P), self.e_dim, self.rows).transpose(0, 2, 1)

    def polyhedral(self):
        return is_polyhedral(self.spec)

    def evaluate_batch(self, Us):
        v = eval_norm_rows(self.spec, self._vec(self._check(Us)))
        return v, v.copy()

    def evaluate_dual_batch(self, Ys):
        v = eval_norm_rows(self.sd, self._vec(self._check(Ys)))
        return v, v.copy()

    def primal_count(self):
        return count_extreme_points(self.spec, half=True)

    def dual_count(self):
        return count_extreme_points(self.sd, half=True)

    def primal_vertices(self, chunk=4096):
        P = extreme_points(self.spec, half=True)
        if isinstance(P, Unavailable):
            raise NotPolyhedral(P.reason)
        yield self._unvec(P)

    def dual_vertices(self, chunk=4096):
        P = extreme_points(self.sd, half=True)
        if isinstance(P, Unavailable):
            raise NotPolyhedral(P.reason)
        yield self._unvec(P)

    def add_epigraph(self, lp, u_idx, t_idx):
        add_norm_epigraph(lp, self.spec, np.asarray(u_idx).T.reshape(-1), t_idx)

    def cvx(self, U):
        import cvxpy as cp

        return cvx_norm(self.spec, cp.vec(U, order="F"))


class ScaledLevel(LevelNorm):
    """||U|| = ||diag(d) U||_inner (weighted atoms)."""

    def __init__(self, inner, d):
        self.inner = inner
        self.d = np.asarray(d, dtype=float)
        self.rows, self.e_dim = inner.rows, inner.e_dim

    def __repr__(self):
        return f"ScaledLevel({self.inner!r}, d={self.d.tolist()})"

    def polyhedral(self):
        return self.inner.polyhedral()

    def evaluate_batch(self, Us):
        return self.inner.evaluate_batch(self.d[None, :, None] * self._check(Us))

    def evaluate_dual_batch(self, Ys):
        return self.inner.evaluate_dual_batch(self._check(Ys) / self.d[None, :, None])

    def primal_count(self):
        return self.inner.primal_count()

    def dual_count(self):
        return self.inner.dual_count()

    def primal_vertices(self, chunk=4096):
        for V in self.inner.primal_vertices(chunk):
            yield V / self.d[None, :, None]

    def dual_vertices(self, chunk=4096):
        for Y in self.inner.dual_vertices(chunk):
            yield Y * self.d[None, :, None]

    def add_epigraph(self, lp, u_idx, t_idx):
        u_idx = np.asarray(u_idx)
        y = lp.add_vars(u_idx.size).reshape(u_idx.shape)
        for i in range(self.rows):
            for j in range(self.e_dim):
                lp.add_eq([u_idx[i, j], y[i, j]], [self.d[i], -1.0])
        self.inner.add_epigraph(lp, y, t_idx)

    def cvx(self, U):
        return self.inner.cvx(np.diag(self.d) @ U)


def _weighted(level, paving, nu):
    d = paving.row_scale(nu)
    return level if np.all(d == 1.0) else ScaledLevel(level, d)


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class MinBlock:
    """A block MIN((L^nu)*) of a well-composed space: columns [offset, offset+size)."""

    offset: int
    size: int
    level: int


@dataclass(frozen=True, eq=False)
class LSpaceInstance:
    paving: Paving
    e_dim: int
    levels: tuple
    recipe: tuple
    blocks: tuple = ()
    registry: tuple | None = None
    e_spec: NormSpec | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.levels) != len(self.paving.levels):
            raise NormSpecError("one level norm per paving level required")
        for nu, lv in enumerate(self.levels):
            if (lv.rows, lv.e_dim) != (self.paving.size(nu), self.e_dim):
                raise NormSpecError(f"level {nu} norm has shape ({lv.rows}, {lv.e_dim})")

    def level_norm(self, nu):
        return self.levels[nu]

    def norm_at(self, nu, U):
        return self.levels[nu].evaluate(U)

    @property
    def well_composed(self):
        return self.registry is not None

    def induced_norm(self, x, nu=0):
        """||xi (x) x|| for a unit xi in level nu."""
        S = self.paving.levels[nu]
        xi = np.zeros(len(S))
        xi[0] = 1.0 / self.paving.row_scale(nu)[0]
        return self.levels[nu].evaluate(np.outer(xi, x))


def ambient_norm(E, u):
    """||u|| = sup_nu ||Q^nu u||_nu for u in l_p^N (x) E."""
    U = u.coeffs if isinstance(u, TensorElement) else np.asarray(u, dtype=float)
    if U.shape != (E.paving.N, E.e_dim):
        raise ValueError(f"tensor shape {U.shape} does not match ({E.paving.N}, {E.e_dim})")
    return combine_sup(E.levels[nu].evaluate(E.paving.restrict(nu, U)) for nu in range(len(E.levels)))


def make_min_space(paving, z, of_level=None):
    """MIN structure on E = z*: every level carries the injective norm L^nu (x)_eps z*."""
    E = dualize(z)
    levels = tuple(_weighted(InjectiveLevel(LpNorm(paving.p, paving.size(nu)), E), paving, nu)
                   for nu in range(len(paving.levels)))
    registry = None if of_level is None else (MinBlock(0, z.dim, of_level),)
    return LSpaceInstance(paving, z.dim, levels, ("min", z, of_level), registry=registry, e_spec=E)


def make_level_min_space(paving, nu):
    """MIN((L^nu)*)."""
    return make_min_space(paving, paving.level_spec(nu), of_level=nu)


def make_bochner_space(paving, e_spec):
    """Levels carry the discretized Bochner norm l_p(L^nu; E) of the paving exponent."""
    levels = tuple(_weighted(BochnerLevel(paving.p, paving.size(nu), e_spec), paving, nu)
                   for nu in range(len(paving.levels)))
    return LSpaceInstance(paving, e_spec.dim, levels, ("bochner", e_spec), e_spec=e_spec)


def make_spec_space(paving, e_dim, level_specs):
    """Per-level NormSpecs on vec(U); consistency across levels is not enforced."""
    if len(level_specs) != len(paving.levels):
        raise NormSpecError("one spec per level required")
    levels = tuple(SpecLevel(s, paving.size(nu), e_dim) for nu, s in enumerate(level_specs))
    return LSpaceInstance(paving, int(e_dim), levels, ("levels", tuple(level_specs)))


def oplus1_sum(spaces):
    """l1-sum of instances over one paving, with the canonical block embeddings."""
    from .morphisms import LOperator

    spaces = list(spaces)
    if not spaces:
        raise NormSpecError("oplus1_sum of an empty list")
    P = spaces[0].paving
    if any(not s.paving.same_as(P) for s in spaces):
        raise NormSpecError("summands must share a paving")
    levels = tuple(SumLevel([s.levels[nu] for s in spaces]) for nu in range(len(P.levels)))
    offsets = np.cumsum([0] + [s.e_dim for s in spaces])
    registry = []
    for s, off in zip(spaces, offsets):
        if s.registry is None:
            registry = None
            break
        registry.extend(MinBlock(b.offset + int(off), b.size, b.level) for b in s.registry)
    blocks = tuple((int(offsets[i]), s.e_dim) for i, s in enumerate(spaces))
    X = LSpaceInstance(P, int(offsets[-1]), levels, ("l1sum", tuple(spaces)), blocks=blocks,
                       registry=None if registry is None else tuple(registry))
    embeddings = []
    for i, s in enumerate(spaces):
        J = np.zeros((X.e_dim, s.e_dim))
        J[offsets[i]:offsets[i + 1], :] = np.eye(s.e_dim)
        embeddings.append(LOperator(J, s, X))
    return X, embeddings


def _realizing_level(paving, z):
    for nu in range(len(paving.levels)):
        try:
            if paving.level_spec(nu) == z:
                return nu
        except NormSpecError:
            continue
    raise NormSpecError(f"summand {z!r} is not realizable as a level of the paving")


def make_well_composed(paving, summands):
    """l1-sum of MIN(Z_mu*) with each Z_mu a level L^nu of the paving."""
    summands = list(summands)
    if not summands:
        raise NormSpecError("make_well_composed needs at least one summand")
    mins = [make_min_space(paving, z, of_level=_realizing_level(paving, z)) for z in summands]
    if len(mins) == 1:
        return mins[0]
    return oplus1_sum(mins)[0]


# ---------------------------------------------------------------------------
# contractibility


@dataclass
class ContractibilityReport:
    passed: bool
    max_violation: float
    samples: int
    pairs: int
    verdict: str = "sampled"
    certified: bool = False
    witness: dict | None = None

    def to_json(self):
        return {
            "verdict": self.verdict if self.passed else "fail",
            "certified": self.certified,
            "max_violation": self.max_violation,
            "samples": self.samples,
            "level_pairs": self.pairs,
            "witnesses": [] if self.witness is None else [self.witness],
        }


def _contraction_norms(A, paving, mu, nu):
    """Upper bounds of ||a||: L^mu -> L^nu for a batch of matrices."""
    dm, dn = paving.row_scale(mu), paving.row_scale(nu)
    B = dn[None, :, None] * A / dm[None, None, :]
    p = paving.p
    if p == 1:
        return np.abs(B).sum(axis=1).max(axis=1)
    if math.isinf(p):
        return np.abs(B).sum(axis=2).max(axis=1)
    if p == 2:
        return np.linalg.norm(B, 2, axis=(1, 2))
    return np.array([paving.base_operator_norm(a, mu, nu).upper for a in A])


def check_contractibility(E, samples=1000, seed=0, tol=1e-9):
    """Sampled test of ||a.u||_nu <= ||a|| ||u||_mu over all ordered level pairs.

    A tenth of the draws are signed partial permutations; the rest are Gaussian
    matrices divided by their operator norm times (1 + 1e-12).
    """
    rng = np.random.default_rng(seed)
    P = E.paving
    L = len(P.levels)
    worst, witness = -math.inf, None
    for mu in range(L):
        for nu in range(L):
            rm, rn = P.size(mu), P.size(nu)
            A = rng.standard_normal((samples, rn, rm))
            n_perm = samples // 10
            for k in range(n_perm):
                a = np.zeros((rn, rm))
                m = min(rn, rm)
                ri = rng.permutation(rn)[:m]
                ci = rng.permutation(rm)[:m]
                a[ri, ci] = rng.choice([-1.0, 1.0], size=m)
                A[k] = a
            norms = _contraction_norms(A, P, mu, nu) * (1 + 1e-12)
            A = A / norms[:, None, None]
            U = rng.standard_normal((samples, rm, E.e_dim))
            # sparse draws probe lower-dimensional faces
            mask = rng.random((samples, rm, E.e_dim)) < 0.3
            U[samples // 2:] *= mask[samples // 2:]
            _, up_u = E.levels[mu].evaluate_batch(U)
            lo_au, _ = E.levels[nu].evaluate_batch(np.einsum("kij,kje->kie", A, U))
            # ||a|| <= 1 after scaling
            viol = lo_au - up_u
            k = int(np.argmax(viol))
            if viol[k] > worst:
                worst = float(viol[k])
                witness = {"from_level": mu, "to_level": nu, "a": A[k].tolist(), "u": U[k].tolist(),
                           "norm_au": float(lo_au[k]), "norm_u": float(up_u[k])}
    worst = max(worst, 0.0)
    passed = worst <= tol
    return ContractibilityReport(passed, worst, samples, L * L, witness=None if passed else witness)


# ---------------------------------------------------------------------------
# JSON


def _recipe_to_json(E):
    kind = E.recipe[0]
    if kind == "min":
        out = {"min_of": spec_to_json(E.recipe[1])}
        if E.recipe[2] is not None:
            out["level"] = E.recipe[2]
        return out
    if kind == "l1sum":
        return {"l1sum": [_recipe_to_json(s) for s in E.recipe[1]]}
    if kind == "bochner":
        return {"bochner": {"e": spec_to_json(E.recipe[1])}}
    if kind == "levels":
        return {"e_dim": E.e_dim, "levels": [spec_to_json(s) for s in E.recipe[1]]}
    raise NormSpecError(f"unknown recipe {kind!r}")


def instance_to_json(E):
    return {"paving": paving_to_json(E.paving), **_recipe_to_json(E)}


def _recipe_from_json(P, obj, path):
    if "min_of" in obj:
        return make_min_space(P, spec_from_json(obj["min_of"], path + ".min_of"), obj.get("level"))
    if "l1sum" in obj:
        parts = [_recipe_from_json(P, o, f"{path}.l1sum[{i}]") for i, o in enumerate(obj["l1sum"])]
        return oplus1_sum(parts)[0]
    if "bochner" in obj:
        return make_bochner_space(P, spec_from_json(obj["bochner"]["e"], path + ".bochner.e"))
    if "levels" in obj:
        if "e_dim" not in obj:
            raise NormSpecError(f"{path}: 'levels' structure needs 'e_dim'")
        specs = [spec_from_json(o, f"{path}.levels[{i}]") for i, o in enumerate(obj["levels"])]
        return make_spec_space(P, obj["e_dim"], specs)
    raise NormSpecError(f"{path}: expected one of min_of, l1sum, bochner, levels")


def instance_from_json(obj, path="space"):
    if not isinstance(obj, dict) or "paving" not in obj:
        raise NormSpecError(f"{path}: missing field 'paving'")
    return _recipe_from_json(paving_from_json(obj["paving"], path + ".paving"), obj, path)
