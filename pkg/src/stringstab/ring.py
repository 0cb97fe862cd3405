"""Closed (circular) vehicle systems: spectral asymptotic-stability analysis.

On a ring of m vehicles, vehicle 1 follows vehicle m.  Absolute position is
unobservable, so the system matrix always carries a structural eigenvalue at
zero which is excluded from the stability verdict.
"""

from __future__ import annotations

import csv
import cmath
from dataclasses import dataclass

import numpy as np

from .idm import LinearCoeffs
from .transfer import build_block_matrices
from .errors import NumericalFailureError, SystemSizeError

__all__ = [
    "RingSystem",
    "ring_matrix",
    "ring_asymptotically_stable",
    "homogeneous_ring_roots",
    "dump_spectrum_csv",
]

MAX_DENSE_SIZE = 512  # vehicles; beyond this a dense eigensolve is refused


@dataclass
class RingSystem:
    """Coefficients and assembled block-circulant system matrix of a ring."""

    coeffs: list[LinearCoeffs]
    a_c: np.ndarray


def ring_matrix(coeffs: list[LinearCoeffs]) -> RingSystem:
    """Assemble the 2m x 2m closed-system matrix (vehicle 1's leader-coupling
    block sits in the top-right corner)."""
    m = len(coeffs)
    if m < 2:
        raise ValueError("a ring needs at least 2 vehicles")
    a_c = np.zeros((2 * m, 2 * m))
    for n, c in enumerate(coeffs):
        blocks = build_block_matrices(c)
        a_c[2 * n : 2 * n + 2, 2 * n : 2 * n + 2] = blocks.a_n1
        lead = (n - 1) % m
        a_c[2 * n : 2 * n + 2, 2 * lead : 2 * lead + 2] = blocks.a_n0
    return RingSystem(list(coeffs), a_c)


def _spectrum(sys: RingSystem) -> np.ndarray:
    m = len(sys.coeffs)
    if m > MAX_DENSE_SIZE:
        homogeneous = all(c == sys.coeffs[0] for c in sys.coeffs)
        if homogeneous:
            return np.array(homogeneous_ring_roots(sys.coeffs[0], m))
        raise SystemSizeError(
            f"heterogeneous ring with {m} > {MAX_DENSE_SIZE} vehicles"
        )
    try:
        eigs = np.linalg.eigvals(sys.a_c)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("ring eigensolver did not converge") from exc
    if not np.all(np.isfinite(eigs)):
        raise NumericalFailureError("ring eigensolver returned non-finite values")
    return eigs


def ring_asymptotically_stable(sys: RingSystem, tol: float = 1e-9) -> bool:
    """True iff all non-structural eigenvalues of a_c have negative real part.

    Eigenvalues within ``tol`` of zero are the translation mode of the ring
    and are excluded from the verdict.
    """
    eigs = _spectrum(sys)
    nonzero = eigs[np.abs(eigs) > tol]
    return bool(np.all(nonzero.real < 0.0))


def homogeneous_ring_roots(c: LinearCoeffs, m: int) -> list[complex]:
    """Roots of the m quadratic factors of the homogeneous closed-loop
    denominator: s^2 - s*(f1 + f3*(z_k - 1)) - f2*(z_k - 1), z_k = e^{2ik pi/m}."""
    if m < 2:
        raise ValueError("a ring needs at least 2 vehicles")
    f1, f2, f3 = c.as_tuple()
    roots: list[complex] = []
    for k in range(m):
        z = cmath.exp(2j * cmath.pi * k / m)
        b = -(f1 + f3 * (z - 1.0))
        cc = -f2 * (z - 1.0)
        disc = cmath.sqrt(b * b - 4.0 * cc)
        roots.extend([(-b + disc) / 2.0, (-b - disc) / 2.0])
    return roots


def dump_spectrum_csv(sys: RingSystem, path) -> None:
    """Eigenvalue real/imaginary parts for external plotting."""
    eigs = _spectrum(sys)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for lam in eigs:
            w.writerow([lam.real, lam.imag])
