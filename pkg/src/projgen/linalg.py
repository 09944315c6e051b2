"""Dense complex-matrix core: Jacobi eigendecomposition and spectral calculus.

Everything here is a pure function of its ndarray inputs and is
deterministic: the Jacobi sweep order is fixed and eigenvector phases are
canonicalized, so repeated calls on identical inputs return bit-identical
arrays.  Matrices are complex128 throughout; intended scale is dense
matrices up to a few hundred rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, PreconditionError

MAX_SWEEPS = 100
# Convergence threshold for the off-diagonal Frobenius mass, relative to
# the Frobenius norm of the input.
OFFDIAG_TOL = 1e-13


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and copy input as a finite complex128 2-d array."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.size == 0:
        raise PreconditionError(f"{name} must be a nonempty 2-d array")
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise PreconditionError(f"{name} contains non-finite entries")
    return np.array(arr, order="C")


def as_square(a, name: str = "matrix") -> np.ndarray:
    arr = as_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise PreconditionError(f"{name} must be square, got shape {arr.shape}")
    return arr


def adjoint(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a Hermitian matrix.

    ``eigenvalues`` are real and sorted ascending; ``eigenvectors`` holds
    the matching orthonormal columns with the canonical phase (the
    largest-magnitude component of each column is real nonnegative).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_dim: int


def _rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    """One complex Jacobi rotation zeroing the (p, q) entry of a, in place."""
    apq = a[p, q]
    absb = abs(apq)
    phase = apq / absb
    tau = (a[q, q].real - a[p, p].real) / (2.0 * absb)
    sgn = 1.0 if tau >= 0.0 else -1.0
    t = sgn / (abs(tau) + math.sqrt(1.0 + tau * tau))
    c = 1.0 / math.sqrt(1.0 + t * t)
    s = t * c
    sp = s * phase
    spc = s * phase.conjugate()

    colp = a[:, p].copy()
    colq = a[:, q].copy()
    a[:, p] = c * colp - spc * colq
    a[:, q] = sp * colp + c * colq
    rowp = a[p, :].copy()
    rowq = a[q, :].copy()
    a[p, :] = c * rowp - sp * rowq
    a[q, :] = spc * rowp + c * rowq
    # the rotation annihilates (p, q) exactly; drop the rounding dust
    a[p, q] = 0.0
    a[q, p] = 0.0
    a[p, p] = a[p, p].real
    a[q, q] = a[q, q].real

    vp = v[:, p].copy()
    vq = v[:, q].copy()
    v[:, p] = c * vp - spc * vq
    v[:, q] = sp * vp + c * vq


def _jacobi(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic-by-rows Jacobi iteration for a Hermitian matrix."""
    n = h.shape[0]
    a = np.array(h, dtype=np.complex128, order="C")
    v = np.eye(n, dtype=np.complex128)
    stop = OFFDIAG_TOL * frobenius(h)
    # entries this small cannot push the off-diagonal mass above `stop`
    skip = stop / (4.0 * n * n)
    offmask = ~np.eye(n, dtype=bool)
    for _ in range(MAX_SWEEPS):
        off = float(np.linalg.norm(a[offmask]))
        if off <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) > skip:
                    _rotate(a, v, p, q)
    else:
        raise ConvergenceError(
            f"Jacobi iteration did not converge within {MAX_SWEEPS} sweeps"
        )

    d = np.diag(a).real.copy()
    order = np.argsort(d, kind="stable")
    d = d[order]
    v = v[:, order]
    for j in range(n):
        col = v[:, j]
        i = int(np.argmax(np.abs(col)))
        piv = col[i]
        mag = abs(piv)
        if mag > 0.0:
            v[:, j] = col * (piv.conjugate() / mag)
    return d, v


def hermitian_eig(h, tol: float = 1e-12) -> Spectrum:
    """Full eigendecomposition of a Hermitian matrix.

    The input must be Hermitian up to ``tol`` relative to its size; it is
    symmetrized before iterating so the decomposition is exactly of
    (H + H*)/2.
    """
    hm = as_square(h, "H")
    defect = frobenius(hm - adjoint(hm))
    if defect > tol * max(1.0, frobenius(hm)):
        raise PreconditionError(
            f"matrix is not Hermitian within tolerance (defect {defect:.3e})"
        )
    hs = 0.5 * (hm + adjoint(hm))
    d, v = _jacobi(hs)
    d.flags.writeable = False
    v.flags.writeable = False
    return Spectrum(eigenvalues=d, eigenvectors=v, source_dim=hm.shape[0])


def operator_norm(a) -> float:
    """Largest singular value, computed as sqrt of the top eigenvalue of A*A."""
    am = as_matrix(a, "A")
    g = adjoint(am) @ am
    g = 0.5 * (g + adjoint(g))
    lam = hermitian_eig(g).eigenvalues
    return math.sqrt(max(float(lam[-1]), 0.0))


def hermitian_norm(h) -> float:
    """Operator norm of a Hermitian matrix via its extreme eigenvalues."""
    lo, hi = spectrum_bounds(h)
    return max(abs(lo), abs(hi))


def matrix_power_half(t, sign: int, tol: float = 1e-10) -> np.ndarray:
    """Hermitian square root (sign=+1) or inverse square root (sign=-1).

    For sign=+1 eigenvalues in [-tol, 0] are clamped to 0; anything below
    -tol is rejected as not positive semidefinite.  For sign=-1 every
    eigenvalue must exceed tol.
    """
    if sign not in (+1, -1):
        raise PreconditionError("sign must be +1 or -1")
    spec = hermitian_eig(t)
    lam = spec.eigenvalues
    lo = float(lam[0])
    if sign == +1:
        if lo < -tol:
            raise PreconditionError(
                f"not positive semidefinite: min eigenvalue {lo:.3e}"
            )
        vals = np.sqrt(np.where(lam < 0.0, 0.0, lam))
    else:
        if lo <= tol:
            raise PreconditionError(
                f"not invertible within tolerance: min eigenvalue {lo:.3e}"
            )
        vals = 1.0 / np.sqrt(lam)
    u = spec.eigenvectors
    r = (u * vals) @ adjoint(u)
    return 0.5 * (r + adjoint(r))


def residuals(p) -> tuple[float, float]:
    """Self-adjointness and idempotency defects ``(||P - P*||, ||P^2 - P||)``."""
    pm = as_square(p, "P")
    return (operator_norm(pm - adjoint(pm)), operator_norm(pm @ pm - pm))


def spectrum_bounds(t) -> tuple[float, float]:
    """Extreme eigenvalues (min, max) of a Hermitian matrix."""
    lam = hermitian_eig(t).eigenvalues
    return float(lam[0]), float(lam[-1])
