"""Tensors in L (x) E as coefficient matrices, injective norms and operator norms.

Every norm value leaves this module as a ``NormEstimate``.  When one of the two
balls involved has an enumerable extreme set the value is exact; otherwise an
alternating ascent supplies the lower bound and ball enclosures the upper one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .normed_core import (
    ENUM_CAP,
    LpNorm,
    NormSpecError,
    ball_maximizer_rows,
    count_extreme_points,
    dualize,
    eval_norm_rows,
    extreme_points,
    vector_from_json,
)

EXACT_RTOL = 1e-9
CHUNK = 1 << 15


@dataclass(frozen=True)
class NormEstimate:
    lower: float
    upper: float
    exact: bool

    def __post_init__(self):
        if self.lower > self.upper + 1e-12 * max(1.0, abs(self.upper)):
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    @classmethod
    def from_bounds(cls, lower, upper):
        lower, upper = float(lower), float(upper)
        upper = max(upper, lower)
        exact = upper - lower <= EXACT_RTOL * max(1.0, lower)
        return cls(lower, upper, exact)

    @classmethod
    def exact_value(cls, value):
        v = float(value)
        return cls(v, v, True)

    @property
    def value(self):
        """Midpoint for exact estimates; the certified lower bound otherwise."""
        return 0.5 * (self.lower + self.upper) if self.exact else self.lower

    def scaled(self, c):
        c = abs(float(c))
        return NormEstimate(self.lower * c, self.upper * c if math.isfinite(self.upper) else math.inf, self.exact)

    def to_json(self):
        return {
            "lower": self.lower,
            "upper": self.upper if math.isfinite(self.upper) else None,
            "exact": self.exact,
        }

    @classmethod
    def from_json(cls, obj):
        up = obj["upper"]
        return cls(float(obj["lower"]), math.inf if up is None else float(up), bool(obj["exact"]))


def combine_sup(estimates):
    """Estimate of the supremum of several quantities."""
    estimates = list(estimates)
    if not estimates:
        return NormEstimate.exact_value(0.0)
    lower = max(e.lower for e in estimates)
    upper = max(e.upper for e in estimates)
    return NormEstimate(lower, upper, all(e.exact for e in estimates) and upper - lower <= EXACT_RTOL * max(1.0, lower))


@dataclass(frozen=True, eq=False)
class TensorElement:
    """u = sum_ij coeffs[i, j] b_i (x) c_j against fixed bases of L and E."""

    coeffs: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.coeffs)
        if C.dtype != object:
            C = np.array(C, dtype=float)
        if C.ndim != 2:
            raise ValueError("tensor coefficients must form a matrix")
        object.__setattr__(self, "coeffs", C)

    @property
    def l_dim(self):
        return self.coeffs.shape[0]

    @property
    def e_dim(self):
        return self.coeffs.shape[1]

    @classmethod
    def elementary(cls, xi, x):
        return cls(np.outer(xi, x))

    def rank(self):
        return int(np.linalg.matrix_rank(np.asarray(self.coeffs, dtype=float)))

    def to_json(self):
        return {"l_dim": self.l_dim, "e_dim": self.e_dim, "coeffs": np.asarray(self.coeffs, dtype=float).tolist()}

    @classmethod
    def from_json(cls, obj, path="tensor"):
        try:
            rows = [vector_from_json(r, f"{path}.coeffs[{i}]") for i, r in enumerate(obj["coeffs"])]
            l_dim, e_dim = int(obj["l_dim"]), int(obj["e_dim"])
        except KeyError as exc:
            raise NormSpecError(f"{path}: missing field {exc}") from None
        C = np.array(rows).reshape(len(rows), -1) if rows else np.zeros((0, e_dim))
        if C.shape != (l_dim, e_dim):
            raise NormSpecError(f"{path}: coeffs shape {C.shape} does not match ({l_dim}, {e_dim})")
        return cls(C)


def module_action(a, u):
    """The left action a . (xi (x) x) = (a xi) (x) x, i.e. a @ coeffs."""
    a = np.asarray(a)
    if a.shape[1] != u.l_dim:
        raise ValueError(f"action of shape {a.shape} on tensor with l_dim {u.l_dim}")
    return TensorElement(a @ u.coeffs)


# ---------------------------------------------------------------------------
# bilinear suprema


def _enum_side(M, A, B, transpose):
    """max over extreme points x of B(A) of ||M^T x||_{B*} (A is the row side)."""
    if transpose:
        M, A, B = M.T, B, A
    X = extreme_points(A, half=True)
    Bd = dualize(B)
    best = 0.0
    for s in range(0, len(X), CHUNK):
        vals = eval_norm_rows(Bd, X[s:s + CHUNK] @ M)
        best = max(best, float(vals.max()))
    return best


def _pick_side(M, A, B):
    nA = count_extreme_points(A, half=True)
    nB = count_extreme_points(B, half=True)
    options = [(n * M.shape[1], False) for n in [nA] if n is not None and n <= ENUM_CAP]
    options += [(n * M.shape[0], True) for n in [nB] if n is not None and n <= ENUM_CAP]
    if not options:
        return None
    return min(options)[1]


def _enclosures(spec):
    """Pairs (d, S) with B(spec) contained in diag(d) B(S) for enumerable S."""
    n = spec.dim
    out = []
    if isinstance(spec, LpNorm):
        p = spec.p
        inv = 0.0 if math.isinf(p) else 1.0 / p
        out.append((np.full(n, n ** (1.0 - inv)), LpNorm(1, n)))
        if n <= 20:
            out.append((np.ones(n), LpNorm(math.inf, n)))
        return out
    if n <= 20:
        # |x_i| <= ||e_i||_* on the unit ball
        d = eval_norm_rows(dualize(spec), np.eye(n))
        out.append((d, LpNorm(math.inf, n)))
    return out


def _l2_constant(spec):
    if isinstance(spec, LpNorm):
        p = spec.p
        inv = 0.0 if math.isinf(p) else 1.0 / p
        return spec.dim ** max(0.0, 0.5 - inv)
    return None


def _ascent(M, A, B, starts, seed, tol=1e-10, cap=500):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((starts, M.shape[1]))
    Y = Y / eval_norm_rows(B, Y)[:, None]
    prev = np.full(starts, -np.inf)
    active = np.ones(starts, dtype=bool)
    vals = np.zeros(starts)
    X = np.zeros((starts, M.shape[0]))
    for _ in range(cap):
        idx = np.flatnonzero(active)
        if not len(idx):
            break
        X[idx] = ball_maximizer_rows(A, Y[idx] @ M.T)
        Y[idx] = ball_maximizer_rows(B, X[idx] @ M)
        vals[idx] = np.einsum("ki,ij,kj->k", X[idx], M, Y[idx])
        active[idx] = vals[idx] - prev[idx] > tol
        prev[idx] = vals[idx]
    k = int(np.argmax(vals))
    # re-evaluate the best pair through the norms to stay inside the balls
    x, y = X[k], Y[k]
    sx = max(1.0, float(eval_norm_rows(A, x[None])[0]))
    sy = max(1.0, float(eval_norm_rows(B, y[None])[0]))
    return max(0.0, float(x @ M @ y) / (sx * sy))


def _upper_bound(M, A, B):
    cands = []
    encA = [(np.ones(A.dim), A)] + _enclosures(A)
    encB = [(np.ones(B.dim), B)] + _enclosures(B)
    for dA, SA in encA:
        for dB, SB in encB:
            if SA is A and SB is B:
                continue
            Ms = dA[:, None] * M * dB[None, :]
            side = _pick_side(Ms, SA, SB)
            if side is None:
                continue
            cands.append(_enum_side(Ms, SA, SB, side))
    cA, cB = _l2_constant(A), _l2_constant(B)
    if cA is not None and cB is not None:
        cands.append(cA * cB * float(np.linalg.norm(M, 2)))
    return min(cands) if cands else math.inf


def bilinear_sup(M, A, B, method="auto", starts=64, seed=0):
    """sup { x^T M y : x in B(A), y in B(B) } as a NormEstimate.

    ``method`` is ``auto`` (enumerate when possible), ``enumerate`` (raise if an
    exact enumeration is impossible) or ``ascent`` (alternating maximization
    with enclosure-based upper bound even when enumeration would work).
    """
    if method not in ("auto", "enumerate", "ascent"):
        raise ValueError(f"unknown method {method!r}")
    M = np.asarray(M, dtype=float)
    if M.shape != (A.dim, B.dim):
        raise ValueError(f"matrix shape {M.shape} does not match dims ({A.dim}, {B.dim})")
    if not np.any(M):
        return NormEstimate.exact_value(0.0)
    if method != "ascent":
        side = _pick_side(M, A, B)
        if side is not None:
            return NormEstimate.exact_value(_enum_side(M, A, B, side))
        if (isinstance(A, LpNorm) and isinstance(B, LpNorm) and A.p == 2 and B.p == 2
                and method == "auto"):
            return NormEstimate.exact_value(float(np.linalg.norm(M, 2)))
        if method == "enumerate":
            raise NormSpecError("neither ball has an enumerable extreme set")
    lower = _ascent(M, A, B, starts, seed)
    upper = _upper_bound(M, A, B)
    return NormEstimate.from_bounds(lower, max(upper, lower))


def injective_norm(l_spec, e_spec, u, method="auto"):
    """||u|| in L (x)_eps E: sup of |f^T U g| over unit functionals f, g."""
    U = u.coeffs if isinstance(u, TensorElement) else np.asarray(u)
    if U.shape != (l_spec.dim, e_spec.dim):
        raise ValueError(f"tensor shape {U.shape} does not match ({l_spec.dim}, {e_spec.dim})")
    return bilinear_sup(np.asarray(U, dtype=float), dualize(l_spec), dualize(e_spec), method=method)


def operator_norm(T, dom, cod, method="auto"):
    """||T||: dom -> cod, with T a cod.dim x dom.dim matrix."""
    T = np.asarray(T, dtype=float)
    if T.shape != (cod.dim, dom.dim):
        raise ValueError(f"operator shape {T.shape} does not match ({cod.dim}, {dom.dim})")
    return bilinear_sup(T, dualize(cod), dom, method=method)
