"""The element w, the bijection between level tensors and operators, free spaces.

For a level L^nu the tensor w = sum_k e_k (x) e_k^* has identity coefficients in
coordinates, whatever Auerbach basis is used.  A level tensor u in L^nu (x) E
corresponds to the operator g -> (g (x) 1)(u) out of MIN((L^nu)*), whose matrix
is u^T; the inverse sends phi to phi_infinity(w) = Phi^T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._exact import frac_matmul, to_fractions
from .lspace_core import (
    LSpaceInstance,
    instance_from_json,
    instance_to_json,
    make_level_min_space,
    oplus1_sum,
)
from .morphisms import LOperator, oplus_operators
from .normed_core import NormSpecError
from .tensor_core import TensorElement, combine_sup


def distinguished_w(paving, nu):
    """w^nu = sum_k e_k (x) e_k^* in L^nu (x) (L^nu)*."""
    return TensorElement(np.eye(paving.size(nu)))


def _level_part(E, nu, u):
    U = u.coeffs if isinstance(u, TensorElement) else np.asarray(u)
    r = E.paving.size(nu)
    if U.shape == (E.paving.N, E.e_dim):
        return E.paving.restrict(nu, U)
    if U.shape == (r, E.e_dim):
        return U
    raise ValueError(f"tensor shape {U.shape} fits neither the base nor level {nu}")


def I_nu(E, nu, u, dom=None):
    """The operator g -> (g (x) 1_E)(Q^nu u) from MIN((L^nu)*) to E."""
    Uq = _level_part(E, nu, u)
    if dom is None:
        dom = make_level_min_space(E.paving, nu)
    return LOperator(np.array(Uq.T), dom, E)


def I_nu_inverse(phi):
    """phi_infinity(w) = w Phi^T, a level tensor in L^nu (x) E."""
    M = phi.exact_matrix if phi.exact_matrix is not None else phi.matrix
    return TensorElement(np.array(M).T)


@dataclass(frozen=True)
class FreeBlock:
    t: object
    level: int
    offset: int
    size: int


@dataclass(frozen=True, eq=False)
class FreeSpace:
    labels: tuple
    registry: tuple
    instance: LSpaceInstance

    def block(self, t, nu):
        for b in self.registry:
            if b.t == t and b.level == nu:
                return b
        raise KeyError((t, nu))

    @property
    def e_dim(self):
        return self.instance.e_dim

    def to_json(self):
        return {
            "space": instance_to_json(self.instance),
            "labels": list(self.labels),
            "registry": [{"t": b.t, "level": b.level, "offset": b.offset, "size": b.size} for b in self.registry],
        }

    @classmethod
    def from_json(cls, obj, path="free"):
        try:
            inst = instance_from_json(obj["space"], path + ".space")
            reg = tuple(FreeBlock(b["t"], int(b["level"]), int(b["offset"]), int(b["size"])) for b in obj["registry"])
            labels = tuple(obj["labels"])
        except KeyError as exc:
            raise NormSpecError(f"{path}: missing field {exc}") from None
        return cls(labels, reg, inst)


def build_free_space(paving, labels):
    """F(M): l1-sum over t in M and all levels nu of MIN((L^nu)*)."""
    labels = tuple(labels)
    if not labels:
        raise NormSpecError("free space over an empty label set")
    if len(set(labels)) != len(labels):
        raise NormSpecError("labels must be distinct")
    mins = [make_level_min_space(paving, nu) for nu in range(len(paving.levels))]
    parts, reg, off = [], [], 0
    for t in labels:
        for nu, m in enumerate(mins):
            parts.append(m)
            reg.append(FreeBlock(t, nu, off, m.e_dim))
            off += m.e_dim
    inst = parts[0] if len(parts) == 1 else oplus1_sum(parts)[0]
    return FreeSpace(labels, tuple(reg), inst)


class RowFamily:
    """f: M -> rows (u_nu)_nu with u_nu in the unit ball of L^nu (x) E."""

    def __init__(self, E, rows, tol=1e-9):
        self.E = E
        self.rows = {}
        for t, row in dict(rows).items():
            clean = {}
            for nu in range(len(E.paving.levels)):
                if nu not in row:
                    raise NormSpecError(f"row {t!r} is missing level {nu}")
                U = row[nu].coeffs if isinstance(row[nu], TensorElement) else np.asarray(row[nu])
                if U.shape != (E.paving.size(nu), E.e_dim):
                    raise NormSpecError(f"row {t!r} level {nu}: shape {U.shape}")
                if E.levels[nu].evaluate(U).lower > 1 + tol:
                    raise NormSpecError(f"row {t!r} level {nu}: outside the unit ball")
                clean[nu] = U
            self.rows[t] = clean

    @property
    def labels(self):
        return tuple(self.rows)

    def triple_norm(self):
        """|||f||| = sup_t sup_nu ||u_nu(t)||."""
        return combine_sup(self.E.levels[nu].evaluate(U) for row in self.rows.values() for nu, U in row.items())

    def scaled(self, lam):
        return RowFamily(self.E, {t: {nu: lam * U for nu, U in row.items()} for t, row in self.rows.items()})

    def mapped(self, phi):
        """The family t -> (1 (x) phi) f(t) in the codomain of phi."""
        return RowFamily(phi.cod, {t: {nu: phi.apply_level(U) for nu, U in row.items()}
                                   for t, row in self.rows.items()})

    def to_json(self):
        return [{"t": t, "rows": {str(nu): TensorElement(U).to_json() for nu, U in row.items()}}
                for t, row in self.rows.items()]

    @classmethod
    def from_json(cls, E, obj, path="rows"):
        rows = {}
        for i, ent in enumerate(obj):
            try:
                rows[ent["t"]] = {int(k): TensorElement.from_json(v, f"{path}[{i}].rows.{k}").coeffs
                                  for k, v in ent["rows"].items()}
            except KeyError as exc:
                raise NormSpecError(f"{path}[{i}]: missing field {exc}") from None
        return cls(E, rows)


def I_bijection(F, E, f):
    """I_E(f) = (+)_t (+)_nu I_nu(E, nu, u_nu(t)) as one operator F(M) -> E."""
    if not E.paving.same_as(F.instance.paving):
        raise NormSpecError("free space and target must share a paving")
    M = np.zeros((E.e_dim, F.e_dim), dtype=object)
    M[...] = 0
    exact = False
    for b in F.registry:
        if b.t not in f.rows:
            raise NormSpecError(f"row family has no entry for label {b.t!r}")
        U = f.rows[b.t][b.level]
        if U.dtype == object:
            exact = True
        M[:, b.offset:b.offset + b.size] = U.T
    if not exact:
        M = M.astype(float)
    return LOperator(M, F.instance, E)


def I_bijection_blocks(F, E, f):
    """The per-block operators whose coproduct is I_bijection(F, E, f)."""
    mins = {}
    ops = []
    for b in F.registry:
        if b.level not in mins:
            mins[b.level] = make_level_min_space(E.paving, b.level)
        ops.append(I_nu(E, b.level, f.rows[b.t][b.level], dom=mins[b.level]))
    return ops


@dataclass
class CanonicalPi:
    free: FreeSpace
    pi: LOperator
    family: RowFamily

    def preimage(self, t):
        """The row v with w^nu in slot (t, nu) and zero elsewhere; pi maps it to f(t)."""
        P = self.free.instance.paving
        out = {}
        for nu in range(len(P.levels)):
            b = self.free.block(t, nu)
            V = np.zeros((P.size(nu), self.free.e_dim))
            V[:, b.offset:b.offset + b.size] = distinguished_w(P, nu).coeffs
            out[nu] = V
        return out

    def image_of(self, row):
        """(1 (x) pi) applied levelwise, in exact rational arithmetic."""
        Pi = self.pi.rational()
        return {nu: frac_matmul(to_fractions(V), Pi.T) for nu, V in row.items()}


def canonical_pi(E, sample):
    """Free space over a finite sample of rows and pi = I_E(identity on the sample)."""
    sample = list(sample)
    family = RowFamily(E, {t: row for t, row in enumerate(sample)})
    F = build_free_space(E.paving, range(len(sample)))
    pi = I_bijection(F, E, family)
    return CanonicalPi(F, pi, family)


__all__ = [
    "distinguished_w",
    "I_nu",
    "I_nu_inverse",
    "FreeSpace",
    "FreeBlock",
    "build_free_space",
    "RowFamily",
    "I_bijection",
    "I_bijection_blocks",
    "CanonicalPi",
    "canonical_pi",
    "oplus_operators",
]
