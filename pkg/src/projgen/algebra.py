"""Concrete finitely generated *-algebras and a span-closure oracle.

A finite set of d x d matrices generates a *-algebra; at finite dimension
that algebra is the smallest linear subspace containing the set that is
closed under products and adjoints.  ``star_closure`` computes an
orthonormal basis of it (trace inner product) by a fixpoint iteration, and
``contains`` decides membership by orthogonal projection onto that basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import PreconditionError
from .linalg import as_matrix, as_square, operator_norm

RANK_TOL = 1e-9


@dataclass
class GeneratorSet:
    """A finite generating family of d x d complex matrices.

    ``unital`` records whether the multiplicative unit has been adjoined;
    ``normalized`` records that every generator has operator norm 1.
    """

    dim: int
    generators: list
    unital: bool = False
    normalized: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise PreconditionError("ambient dimension must be >= 1")
        mats = []
        for g in self.generators:
            m = as_square(g, "generator")
            if m.shape != (self.dim, self.dim):
                raise PreconditionError(
                    f"generator shape {m.shape} does not match dim {self.dim}"
                )
            mats.append(m)
        self.generators = mats


def is_identity(m: np.ndarray, tol: float = 1e-12) -> bool:
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.allclose(m, np.eye(m.shape[0]), rtol=0.0, atol=tol))


def unitize(g: GeneratorSet) -> GeneratorSet:
    """Adjoin the ambient identity unless the set is already marked unital."""
    if g.unital:
        return g
    gens = list(g.generators) + [np.eye(g.dim, dtype=np.complex128)]
    return GeneratorSet(g.dim, gens, unital=True, normalized=g.normalized)


def normalize(g: GeneratorSet) -> GeneratorSet:
    """Scale each generator to operator norm 1 and drop zero generators.

    The generated *-algebra is unchanged by either operation.
    """
    gens = []
    for m in g.generators:
        nrm = operator_norm(m)
        if nrm == 0.0:
            continue
        gens.append(m / nrm)
    return GeneratorSet(g.dim, gens, unital=g.unital, normalized=True)


@dataclass
class StarClosure:
    """Orthonormal basis (trace inner product) of a product/adjoint-closed span.

    ``saturated`` is False only when the dimension cap stopped the fixpoint
    iteration before closure was reached.  ``flat`` stacks the basis row-wise
    as vectors of length dim_ambient**2.
    """

    dim_ambient: int
    basis: list
    dimension: int
    saturated: bool
    rank_tol: float
    flat: np.ndarray = field(repr=False, default=None)


class Membership(NamedTuple):
    contained: bool
    residual: float


def _products(x: np.ndarray, y: np.ndarray, d: int) -> np.ndarray:
    """All pairwise products of two stacks of flattened matrices, x-major order."""
    a = x.reshape(-1, d, d)
    b = y.reshape(-1, d, d)
    return np.einsum("aij,bjk->abik", a, b).reshape(-1, d * d)


def _adjoints(x: np.ndarray, d: int) -> np.ndarray:
    return x.reshape(-1, d, d).transpose(0, 2, 1).conj().reshape(-1, d * d)


def star_closure(mats, dim_cap: int | None = None, rank_tol: float = RANK_TOL) -> StarClosure:
    """Smallest adjoint- and product-closed subspace containing the inputs.

    Repeatedly multiplies the current basis against itself and adjoins
    adjoints, accepting a candidate as a new basis direction when its
    residual after projection exceeds ``rank_tol`` (relative to the
    candidate norm, floored at 1).  Stops at the fixpoint, or once the
    span is the full matrix algebra, or - with ``saturated=False`` - when
    accepting another direction would exceed ``dim_cap``.
    """
    ms = [as_square(m, "matrix") for m in mats]
    if not ms:
        raise PreconditionError("need at least one generating matrix")
    d = ms[0].shape[0]
    for m in ms:
        if m.shape != (d, d):
            raise PreconditionError("all matrices must share one square size")
    full = d * d
    if dim_cap is not None and dim_cap < 1:
        raise PreconditionError("dim_cap must be >= 1")
    cap = full if dim_cap is None else min(int(dim_cap), full)

    basis = np.zeros((0, full), dtype=np.complex128)
    saturated = True

    def accept(cands: np.ndarray) -> np.ndarray:
        """Modified Gram-Schmidt intake of a candidate batch; returns new rows."""
        nonlocal basis, saturated
        norms0 = np.linalg.norm(cands, axis=1)
        keep = norms0 > rank_tol
        cands = cands[keep]
        norms0 = norms0[keep]
        if cands.shape[0] == 0:
            return np.zeros((0, full), dtype=np.complex128)
        r = cands
        if basis.shape[0]:
            r = r - (r @ basis.conj().T) @ basis
            r = r - (r @ basis.conj().T) @ basis  # re-orthogonalization pass
        thresh = rank_tol * np.maximum(1.0, norms0)
        surv = np.linalg.norm(r, axis=1) > thresh
        r = r[surv]
        thresh = thresh[surv]
        added = []
        for i in range(r.shape[0]):
            row = r[i]
            rn = np.linalg.norm(row)
            if rn <= thresh[i]:
                continue
            if basis.shape[0] + len(added) >= cap:
                saturated = False
                break
            row = row / rn
            if i + 1 < r.shape[0]:
                coeff = r[i + 1 :] @ row.conj()
                r[i + 1 :] -= coeff[:, None] * row[None, :]
            added.append(row)
        if not added:
            return np.zeros((0, full), dtype=np.complex128)
        new = np.array(added)
        basis = np.vstack([basis, new])
        return new

    new = accept(np.stack([m.reshape(-1) for m in ms]))
    while new.shape[0] and saturated:
        if basis.shape[0] >= full:
            break  # full matrix algebra; closed by construction
        old_count = basis.shape[0] - new.shape[0]
        chunks = [_adjoints(new, d), _products(new, basis, d)]
        if old_count:
            chunks.append(_products(basis[:old_count], new, d))
        new = accept(np.concatenate(chunks))

    return StarClosure(
        dim_ambient=d,
        basis=[row.reshape(d, d) for row in basis],
        dimension=basis.shape[0],
        saturated=saturated,
        rank_tol=rank_tol,
        flat=basis,
    )


def contains(c: StarClosure, m, tol: float = 1e-8) -> Membership:
    """Membership of a matrix in the closed span, with the projection residual.

    The residual is the Frobenius distance to the span (the norm induced by
    the trace inner product the basis is orthonormal under); membership
    holds when it is at most ``tol * max(1, ||M||_F)``.
    """
    mm = as_matrix(m, "M")
    if mm.shape != (c.dim_ambient, c.dim_ambient):
        raise PreconditionError(
            f"matrix shape {mm.shape} does not match ambient dimension {c.dim_ambient}"
        )
    vec = mm.reshape(-1)
    coeff = c.flat.conj() @ vec
    resid = vec - coeff @ c.flat
    residual = float(np.linalg.norm(resid))
    ok = residual <= tol * max(1.0, float(np.linalg.norm(vec)))
    return Membership(bool(ok), residual)
