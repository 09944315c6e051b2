"""Projection families generating matrix amplifications of *-algebras.

Given n normalized generators of a d x d matrix *-algebra and any k with
(k-1)(k-2) >= 2n, the generators are packed into the off-diagonal blocks of
a Hermitian kd x kd operator

    T = 1 + eps * (packed blocks, unit blocks against the last row/column),

which is positive and invertible for eps in (0, 1/(8(k-1))).  The family
p_i = T^(1/2) (1 (x) e_ii) T^(1/2) then consists of k projections that are
mutually unitarily equivalent, almost mutually orthogonal, and generate the
full k x k amplification of the unitized source algebra.  This module
assembles the operator, builds the family, and certifies every quantitative
bound involved:

    spectrum(T) in [1 - (k-1)*eta, 1 + (k-1)*eta]    (eta = eps * max block norm)
    ||T - 1||        <= (k-1)*eta
    ||T^(-1/2) - 1|| <= 2(k-1)*eta
    ||p_j - 1 (x) e_jj|| < 8(k-1)*eps < 1
    ||p_i p_j||          < 16(k-1)*eps        (i != j)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    GeneratorSet,
    StarClosure,
    contains,
    is_identity,
    normalize,
    star_closure,
    unitize,
)
from .errors import ClosureCapError, PreconditionError, VerificationError
from .linalg import (
    adjoint,
    as_square,
    frobenius,
    hermitian_norm,
    matrix_power_half,
    operator_norm,
    residuals,
    spectrum_bounds,
)

SLACK = 1e-9
PROJ_TOL = 1e-9


def delta(n: int) -> int:
    """Smallest k with (k-1)(k-2) >= 2n slots for n generators; always >= 3."""
    if n < 1:
        raise PreconditionError("n must be a natural number >= 1")
    k = max(3, math.isqrt(2 * n))
    while (k - 1) * (k - 2) < 2 * n:
        k += 1
    return k


def min_amplification(n: int) -> int:
    """Least l >= 1 with l**2 + 1 >= n (single-generation amplification size)."""
    if n < 1:
        raise PreconditionError("n must be a natural number >= 1")
    l = math.isqrt(n - 1)
    if l * l < n - 1:
        l += 1
    return max(l, 1)


def admissible_epsilon(k: int) -> float:
    """Upper end of the admissible interval (0, 1/(8(k-1)))."""
    return 1.0 / (8.0 * (k - 1))


def default_epsilon(k: int) -> float:
    """Default eps = 1/(16(k-1)): inside the interval with numerical headroom."""
    return 1.0 / (16.0 * (k - 1))


def matrix_unit(size: int, i: int, j: int) -> np.ndarray:
    """Matrix unit e_ij (0-indexed)."""
    m = np.zeros((size, size), dtype=np.complex128)
    m[i, j] = 1.0
    return m


def diagonal_units(k: int, block_dim: int) -> list:
    """The exact 0/1 block-diagonal projections 1 (x) e_ii, i = 1..k."""
    eye = np.eye(block_dim, dtype=np.complex128)
    return [np.kron(matrix_unit(k, i, i), eye) for i in range(k)]


def slot_indices(k: int) -> list:
    """Off-diagonal slots (i, j), 1 <= i < j <= k-1, in lexicographic order."""
    return [(i, j) for i in range(1, k) for j in range(i + 1, k)]


@dataclass
class PackingPlan:
    """Assignment of generators to block slots; None marks unit padding."""

    k: int
    slot_map: dict
    source_count: int


def pack(g: GeneratorSet, k: int) -> PackingPlan:
    """Fill the (k-1)(k-2)/2 slots with the generators, padding with the unit.

    Requires a unital, normalized generator set.  Generators equal to the
    ambient identity are indistinguishable from padding and are treated as
    such.  Slots are filled in lexicographic (i, j) order, generators first.
    """
    if not g.unital:
        raise PreconditionError("generator set must be unital (adjoin the unit first)")
    source = [m for m in g.generators if not is_identity(m)]
    for m in source:
        if abs(operator_norm(m) - 1.0) > 1e-9:
            raise PreconditionError("generators must be normalized to operator norm 1")
    n = len(source)
    slots = slot_indices(k)
    if len(slots) < max(n, 1):
        raise PreconditionError(
            f"k={k} provides {len(slots)} slots but {max(n, 1)} are needed "
            f"(require k >= delta(n) = {delta(max(n, 1))})"
        )
    slot_map = {}
    for idx, pos in enumerate(slots):
        slot_map[pos] = source[idx] if idx < n else None
    return PackingPlan(k=k, slot_map=slot_map, source_count=n)


@dataclass
class BlockPerturbation:
    """The positive Hermitian operator T = 1 + eps*(blocks) with cached roots."""

    k: int
    epsilon: float
    eta: float
    block_dim: int
    matrix: np.ndarray
    sqrt: np.ndarray
    inv_sqrt: np.ndarray


def build_block_matrix(k: int, block_dim: int, offdiag: dict) -> np.ndarray:
    """Hermitian block matrix with identity diagonal and given (i, j) blocks.

    ``offdiag`` maps 1-indexed pairs (i, j), i < j <= k, to d x d blocks;
    the conjugate blocks are filled in automatically.
    """
    d = block_dim
    m = np.eye(k * d, dtype=np.complex128)
    for (i, j), block in offdiag.items():
        if not (1 <= i < j <= k):
            raise PreconditionError(f"block index {(i, j)} out of range for k={k}")
        b = as_square(block, f"block {(i, j)}")
        if b.shape != (d, d):
            raise PreconditionError(f"block {(i, j)} has shape {b.shape}, need {(d, d)}")
        bi, bj = i - 1, j - 1
        m[bi * d : (bi + 1) * d, bj * d : (bj + 1) * d] = b
        m[bj * d : (bj + 1) * d, bi * d : (bi + 1) * d] = adjoint(b)
    return m


def assemble_perturbation(plan: PackingPlan, g: GeneratorSet, epsilon: float) -> BlockPerturbation:
    """Assemble T from a packing plan and cache its square root and inverse root.

    The slots occupy (i, j) with i < j <= k-1 scaled by eps; the blocks
    against the last row/column are eps times the unit.  eps must lie in
    (0, 1/(8(k-1))).
    """
    k, d = plan.k, g.dim
    limit = admissible_epsilon(k)
    if not (0.0 < epsilon < limit):
        raise PreconditionError(
            f"epsilon={epsilon!r} outside the admissible interval (0, {limit!r}) for k={k}"
        )
    eye = np.eye(d, dtype=np.complex128)
    offdiag = {}
    max_block = 1.0  # the unit blocks in the last column have norm 1
    for (i, j), block in sorted(plan.slot_map.items()):
        if block is None:
            offdiag[(i, j)] = epsilon * eye
        else:
            nrm = operator_norm(block)
            if abs(nrm - 1.0) > 1e-9:
                raise PreconditionError("non-normalized generator in packing plan")
            max_block = max(max_block, nrm)
            offdiag[(i, j)] = epsilon * block
    for i in range(1, k):
        offdiag[(i, k)] = epsilon * eye
    m = build_block_matrix(k, d, offdiag)
    eta = epsilon * max_block
    return BlockPerturbation(
        k=k,
        epsilon=epsilon,
        eta=eta,
        block_dim=d,
        matrix=m,
        sqrt=matrix_power_half(m, +1),
        inv_sqrt=matrix_power_half(m, -1),
    )


@dataclass
class PerturbationCertificate:
    """Measured positivity/invertibility certificate for a block perturbation.

    The hypothesis eta < 1/(2(k-1)) is a hard gate; every other check is
    recorded, with failures listed rather than raised.
    """

    k: int
    eta: float
    hypothesis_bound: float
    diagonally_dominant: bool
    lambda_min: float
    lambda_max: float
    predicted_interval: tuple
    norm_t_minus_1: float
    bound_t_minus_1: float
    norm_invsqrt_minus_1: float
    bound_invsqrt_minus_1: float
    passed: bool
    failures: list = field(default_factory=list)


def certify_block_matrix(matrix, k: int, block_dim: int, slack: float = SLACK) -> PerturbationCertificate:
    """Certify positivity, invertibility, and the near-identity norm bounds.

    Works on any Hermitian block matrix with identity diagonal blocks whose
    off-diagonal block norms stay below 1/(2(k-1)).  Checks, with additive
    slack: strict diagonal dominance of the real comparison matrix (the
    Levy-Desplanques route), lambda_min > 0, spectrum containment in
    [1 - (k-1)*eta, 1 + (k-1)*eta], ||T - 1|| <= (k-1)*eta, and
    ||T^(-1/2) - 1|| <= 2(k-1)*eta.
    """
    d = block_dim
    m = as_square(matrix, "T")
    if m.shape != (k * d, k * d):
        raise PreconditionError(f"matrix shape {m.shape} does not match k*d = {k * d}")
    if frobenius(m - adjoint(m)) > 1e-12 * max(1.0, frobenius(m)):
        raise PreconditionError("matrix is not Hermitian within tolerance")
    eye_d = np.eye(d)
    norms = np.zeros((k, k))
    for i in range(k):
        blk = m[i * d : (i + 1) * d, i * d : (i + 1) * d]
        if operator_norm(blk - eye_d) > 1e-10:
            raise PreconditionError("diagonal blocks must equal the identity")
        for j in range(i + 1, k):
            nrm = operator_norm(m[i * d : (i + 1) * d, j * d : (j + 1) * d])
            norms[i, j] = norms[j, i] = nrm
    eta = float(norms.max())
    hyp = 1.0 / (2.0 * (k - 1))
    if eta >= hyp:
        raise PreconditionError(
            f"hypothesis violated: eta={eta!r} >= 1/(2(k-1)) = {hyp!r}"
        )

    failures = []
    dominant = bool(np.all(norms.sum(axis=1) < 1.0))
    if not dominant:
        failures.append("comparison matrix is not strictly diagonally dominant")
    gap = (k - 1) * eta
    lam_min, lam_max = spectrum_bounds(m)
    if lam_min <= 0.0:
        failures.append(f"not positive definite: lambda_min={lam_min!r}")
    if lam_min < 1.0 - gap - slack or lam_max > 1.0 + gap + slack:
        failures.append(
            f"spectrum [{lam_min!r}, {lam_max!r}] escapes [{1.0 - gap!r}, {1.0 + gap!r}]"
        )
    eye = np.eye(k * d)
    norm_t = hermitian_norm(m - eye)
    if norm_t > gap + slack:
        failures.append(f"||T - 1|| = {norm_t!r} exceeds (k-1)*eta = {gap!r}")
    inv_root = matrix_power_half(m, -1)
    norm_inv = hermitian_norm(inv_root - eye)
    if norm_inv > 2.0 * gap + slack:
        failures.append(
            f"||T^(-1/2) - 1|| = {norm_inv!r} exceeds 2(k-1)*eta = {2.0 * gap!r}"
        )
    return PerturbationCertificate(
        k=k,
        eta=eta,
        hypothesis_bound=hyp,
        diagonally_dominant=dominant,
        lambda_min=lam_min,
        lambda_max=lam_max,
        predicted_interval=(1.0 - gap, 1.0 + gap),
        norm_t_minus_1=norm_t,
        bound_t_minus_1=gap,
        norm_invsqrt_minus_1=norm_inv,
        bound_invsqrt_minus_1=2.0 * gap,
        passed=not failures,
        failures=failures,
    )


def certify_perturbation(bp: BlockPerturbation, slack: float = SLACK) -> PerturbationCertificate:
    return certify_block_matrix(bp.matrix, bp.k, bp.block_dim, slack=slack)


@dataclass
class ProjectionFamily:
    """The k projections p_i = T^(1/2) (1 (x) e_ii) T^(1/2) and their units."""

    k: int
    projections: list
    diagonal_units: list
    source: BlockPerturbation


def build_projections(bp: BlockPerturbation, tol: float = PROJ_TOL) -> ProjectionFamily:
    """Conjugate the diagonal units by T^(1/2) and check projection residuals.

    Identity diagonal blocks make each p_i an exact projection; the residual
    gate catches an eigensolver failure or an invalid operator.  The family
    sums to T itself, checked to 1e-10.
    """
    units = diagonal_units(bp.k, bp.block_dim)
    projs = []
    for idx, e in enumerate(units):
        p = bp.sqrt @ e @ bp.sqrt
        sa, idem = residuals(p)
        if sa > tol or idem > tol:
            raise VerificationError(
                f"projection {idx + 1} fails residuals: self-adjointness {sa:.3e}, "
                f"idempotency {idem:.3e} (tolerance {tol:.1e})"
            )
        projs.append(p)
    total = projs[0].copy()
    for p in projs[1:]:
        total += p
    defect = hermitian_norm(total - bp.matrix)
    if defect > 1e-10:
        raise VerificationError(f"sum of projections deviates from T by {defect:.3e}")
    return ProjectionFamily(k=bp.k, projections=projs, diagonal_units=units, source=bp)


@dataclass
class BoundsReport:
    """Every measured quantity of a family against its predicted bound."""

    k: int
    epsilon: float
    eta: float
    predicted_interval: tuple
    spectrum: tuple
    norm_t_minus_1: float
    norm_invsqrt_minus_1: float
    pairwise_products: np.ndarray
    distances_to_units: list
    bound_16: float
    bound_8: float
    all_pass: bool
    failures: list = field(default_factory=list)

    @property
    def max_pairwise_product(self) -> float:
        return float(self.pairwise_products.max())

    @property
    def max_distance_to_units(self) -> float:
        return max(self.distances_to_units)


def verify_family(fam: ProjectionFamily, slack: float = SLACK) -> BoundsReport:
    """Measure all family bounds; failures are recorded, never raised.

    Invertibility of sum(p_i) = T is certified through
    lambda_min(T) >= 1 - (k-1)*eta > 0.
    """
    bp = fam.source
    k = fam.k
    eps, eta = bp.epsilon, bp.eta
    gap = (k - 1) * eta
    lam_min, lam_max = spectrum_bounds(bp.matrix)
    eye = np.eye(k * bp.block_dim)
    norm_t = hermitian_norm(bp.matrix - eye)
    norm_inv = hermitian_norm(bp.inv_sqrt - eye)
    pair = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            v = operator_norm(fam.projections[i] @ fam.projections[j])
            pair[i, j] = pair[j, i] = v
    dists = [
        hermitian_norm(p - e) for p, e in zip(fam.projections, fam.diagonal_units)
    ]
    bound_16 = 16.0 * (k - 1) * eps
    bound_8 = 8.0 * (k - 1) * eps

    failures = []
    if lam_min < 1.0 - gap - slack or lam_max > 1.0 + gap + slack:
        failures.append(
            f"spectrum [{lam_min!r}, {lam_max!r}] escapes [{1.0 - gap!r}, {1.0 + gap!r}]"
        )
    if lam_min <= 0.0:
        failures.append(f"sum of projections not invertible: lambda_min={lam_min!r}")
    if norm_t > gap + slack:
        failures.append(f"||T - 1|| = {norm_t!r} exceeds {gap!r}")
    if norm_inv > 2.0 * gap + slack:
        failures.append(f"||T^(-1/2) - 1|| = {norm_inv!r} exceeds {2.0 * gap!r}")
    worst_pair = float(pair.max())
    if worst_pair >= bound_16 + slack:
        failures.append(f"max ||p_i p_j|| = {worst_pair!r} reaches {bound_16!r}")
    worst_dist = max(dists)
    if worst_dist >= bound_8 + slack:
        failures.append(f"max ||p_j - I_j|| = {worst_dist!r} reaches {bound_8!r}")

    return BoundsReport(
        k=k,
        epsilon=eps,
        eta=eta,
        predicted_interval=(1.0 - gap, 1.0 + gap),
        spectrum=(lam_min, lam_max),
        norm_t_minus_1=norm_t,
        norm_invsqrt_minus_1=norm_inv,
        pairwise_products=pair,
        distances_to_units=dists,
        bound_16=bound_16,
        bound_8=bound_8,
        all_pass=not failures,
        failures=failures,
    )


def orthogonalize(fam: ProjectionFamily, tol: float = 1e-8) -> list:
    """Recover the exact mutually orthogonal units I_i = T^(-1/2) p_i T^(-1/2).

    Verifies the conjugation lands on the 0/1 diagonal units and that every
    ||p_i - I_i|| < 1 (the regime in which p_i and I_i are unitarily
    equivalent); returns the exact units, which sum to the identity.
    """
    bp = fam.source
    units = diagonal_units(bp.k, bp.block_dim)
    worst = max(
        hermitian_norm(p - e) for p, e in zip(fam.projections, fam.diagonal_units)
    )
    if worst >= 1.0:
        raise PreconditionError(
            f"max ||p_i - I_i|| = {worst!r} >= 1; epsilon is outside the usable range"
        )
    for idx, (p, e) in enumerate(zip(fam.projections, units)):
        c = bp.inv_sqrt @ p @ bp.inv_sqrt
        if frobenius(c - e) > tol:
            raise VerificationError(
                f"T^(-1/2) p_{idx + 1} T^(-1/2) deviates from the diagonal unit "
                f"by {frobenius(c - e):.3e}"
            )
    return [e.copy() for e in units]


def unitary_intertwiner(p, q, tol: float = PROJ_TOL) -> np.ndarray:
    """Unitary U with U p U* = q for projections at distance below 1.

    Uses the displacement v = qp + (1-q)(1-p) and its polar part
    U = v (v*v)^(-1/2); v*v = 1 - (p-q)^2 is invertible exactly when
    ||p - q|| < 1.
    """
    pm = as_square(p, "p")
    qm = as_square(q, "q")
    if pm.shape != qm.shape:
        raise PreconditionError("p and q must have the same shape")
    for name, m in (("p", pm), ("q", qm)):
        sa, idem = residuals(m)
        if sa > tol or idem > tol:
            raise PreconditionError(
                f"{name} is not a projection within tolerance "
                f"(residuals {sa:.3e}, {idem:.3e})"
            )
    dist = hermitian_norm(pm - qm)
    if dist >= 1.0:
        raise PreconditionError(
            f"||p - q|| = {dist!r} >= 1; the displacement construction needs distance < 1"
        )
    one = np.eye(pm.shape[0], dtype=np.complex128)
    v = qm @ pm + (one - qm) @ (one - pm)
    w = adjoint(v) @ v
    w = 0.5 * (w + adjoint(w))
    return v @ matrix_power_half(w, -1)


@dataclass
class GenerationReport:
    """Outcome of the generation check: dimension law plus membership trace."""

    k: int
    source_dimension: int
    family_dimension: int
    expected_dimension: int
    dimension_match: bool
    memberships: list
    max_membership_residual: float
    passed: bool


def check_generation(
    fam: ProjectionFamily,
    source: GeneratorSet,
    plan: PackingPlan | None = None,
    membership_tol: float = 1e-8,
    rank_tol: float = 1e-9,
    dim_cap: int | None = None,
) -> GenerationReport:
    """Decide whether the family generates the full amplification.

    Passes when the closure of {p_1, ..., p_k} has dimension exactly
    k**2 times the closure dimension of the unitized source, and every
    block unit 1 (x) e_ij and every packed generator block lies in the
    family closure.  Raises ClosureCapError if either closure hits its cap.
    """
    d = source.dim
    k = fam.k
    ambient = k * d
    if fam.projections[0].shape != (ambient, ambient):
        raise PreconditionError(
            f"family ambient dimension {fam.projections[0].shape[0]} "
            f"does not equal k * dim = {ambient}"
        )
    src = star_closure(unitize(source).generators, rank_tol=rank_tol)
    if not src.saturated:
        raise ClosureCapError("source closure hit its dimension cap")
    fam_cap = ambient * ambient if dim_cap is None else min(dim_cap, ambient * ambient)
    fam_cl = star_closure(fam.projections, dim_cap=fam_cap, rank_tol=rank_tol)
    if not fam_cl.saturated:
        raise ClosureCapError(
            "family closure hit its dimension cap; raise --max-dim or loosen rank_tol"
        )
    expected = k * k * src.dimension
    match = fam_cl.dimension == expected

    if plan is None:
        plan = pack(unitize(normalize(source)), k)
    eye_d = np.eye(d, dtype=np.complex128)
    memberships = []
    for i in range(k):
        for j in range(k):
            mem = contains(fam_cl, np.kron(matrix_unit(k, i, j), eye_d), membership_tol)
            memberships.append((f"unit[{i + 1},{j + 1}]", mem.residual, mem.contained))
    for (i, j), block in sorted(plan.slot_map.items()):
        if block is None:
            continue
        mem = contains(fam_cl, np.kron(matrix_unit(k, i - 1, j - 1), block), membership_tol)
        memberships.append((f"slot[{i},{j}]", mem.residual, mem.contained))
    max_resid = max(r for _, r, _ in memberships)
    passed = match and all(ok for _, _, ok in memberships)
    return GenerationReport(
        k=k,
        source_dimension=src.dimension,
        family_dimension=fam_cl.dimension,
        expected_dimension=expected,
        dimension_match=match,
        memberships=memberships,
        max_membership_residual=max_resid,
        passed=passed,
    )


@dataclass
class TwoProjectionReport:
    """Measurements for the explicit two-projection pair in M_2."""

    epsilon: float
    product_norm: float
    sum_min_eigenvalue: float
    sum_invertible: bool
    closure_dimension: int
    intertwiner: np.ndarray
    unitary_residual: float
    conjugation_residual: float


def two_projection_example(epsilon: float):
    """The explicit pair p1 = e_11, p2 = rotated rank-1 projection in M_2.

    For eps in (0, 1): ||p1 p2|| = sqrt(eps), p1 + p2 is invertible, the two
    projections are unitarily equivalent, and together they generate all of
    M_2 (closure dimension 4).
    """
    if not (0.0 < epsilon < 1.0):
        raise PreconditionError("epsilon must lie in (0, 1)")
    s = math.sqrt(epsilon * (1.0 - epsilon))
    p1 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128)
    p2 = np.array([[epsilon, s], [s, 1.0 - epsilon]], dtype=np.complex128)
    product_norm = operator_norm(p1 @ p2)
    lam_min = spectrum_bounds(p1 + p2)[0]
    cl = star_closure([p1, p2])
    u = unitary_intertwiner(p1, p2)
    eye = np.eye(2)
    report = TwoProjectionReport(
        epsilon=epsilon,
        product_norm=product_norm,
        sum_min_eigenvalue=lam_min,
        sum_invertible=lam_min > 0.0,
        closure_dimension=cl.dimension,
        intertwiner=u,
        unitary_residual=operator_norm(adjoint(u) @ u - eye),
        conjugation_residual=operator_norm(u @ p1 @ adjoint(u) - p2),
    )
    return p1, p2, report


@dataclass
class PipelineResult:
    """All artifacts of the normalize/pack/assemble/build/verify/generate run."""

    delta_n: int
    k: int
    epsilon: float
    plan: PackingPlan
    perturbation: BlockPerturbation
    certificate: PerturbationCertificate
    family: ProjectionFamily
    bounds: BoundsReport
    generation: GenerationReport
    passed: bool


def family_pipeline(
    g: GeneratorSet,
    k: int | None = None,
    epsilon: float | None = None,
    proj_tol: float = PROJ_TOL,
    rank_tol: float = 1e-9,
    dim_cap: int | None = None,
) -> PipelineResult:
    """Run the full construction and verification for a generator set.

    k defaults to delta(n) for n the number of non-identity generators
    (at least 1); epsilon defaults to 1/(16(k-1)).
    """
    gn = normalize(g)
    gu = unitize(gn)
    n_eff = max(1, sum(1 for m in gu.generators if not is_identity(m)))
    dn = delta(n_eff)
    kk = dn if k is None else int(k)
    eps = default_epsilon(kk) if epsilon is None else float(epsilon)
    plan = pack(gu, kk)
    bp = assemble_perturbation(plan, gu, eps)
    cert = certify_perturbation(bp)
    fam = build_projections(bp, tol=proj_tol)
    bounds = verify_family(fam)
    gen = check_generation(fam, gn, plan=plan, rank_tol=rank_tol, dim_cap=dim_cap)
    return PipelineResult(
        delta_n=dn,
        k=kk,
        epsilon=eps,
        plan=plan,
        perturbation=bp,
        certificate=cert,
        family=fam,
        bounds=bounds,
        generation=gen,
        passed=cert.passed and bounds.all_pass and gen.passed,
    )
