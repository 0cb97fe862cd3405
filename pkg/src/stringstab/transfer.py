"""Transfer functions, H-infinity machinery and string-stability predicates.

Every vehicle contributes a second-order speed-to-speed transfer function

    Gamma(s) = (f3*s + f2) / (s^2 + (f3 - f1)*s + f2)

with unit DC gain.  Strict string stability of a vehicle is equivalent to
S = f1^2 - 2*f1*f3 - 2*f2 >= 0; weak (l, n) string stability of a chain is
certified through the H-infinity norm of the product of the Gamma factors,
computed by bisection on the imaginary-axis eigenvalues of the Hamiltonian
matrix of a cascaded state-space realization.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .chain import VehicleChain
from .idm import LinearCoeffs
from .errors import NumericalFailureError

__all__ = [
    "BlockMatrices",
    "SecondOrderTf",
    "TfChainGain",
    "StabilityReport",
    "build_block_matrices",
    "gamma_gain",
    "string_stability_coefficient",
    "hinf_second_order",
    "chain_state_space",
    "hinf_chain",
    "bounded_real_check",
    "mimo_sigma_max",
    "linf_step_monotone",
    "impulse_l1_norm",
    "analyze_chain",
]

# Frequency window covering all realistic coefficient magnitudes (|f| <~ 10).
OMEGA_MIN = 1e-4
OMEGA_MAX = 1e3


@dataclass(frozen=True)
class BlockMatrices:
    """2x2 coupling blocks and input vector of one vehicle's linear dynamics."""

    a_n0: np.ndarray  # leader-coupling block
    a_n1: np.ndarray  # self block
    b_v: np.ndarray  # disturbance input (acts on acceleration only)


@dataclass(frozen=True)
class SecondOrderTf:
    """Second-order transfer function tag; all kinds share denominator
    U(s) = s^2 + s*(f3 - f1) + f2."""

    coeffs: LinearCoeffs
    kind: str  # "gamma_speed" | "gamma_headway" | "g_headway" | "g_speed"

    KINDS = ("gamma_speed", "gamma_headway", "g_headway", "g_speed")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown transfer-function kind {self.kind!r}")

    def numerator(self) -> np.ndarray:
        """Numerator polynomial coefficients, highest degree first."""
        f1, f2, f3 = self.coeffs.as_tuple()
        return {
            "gamma_speed": np.array([f3, f2]),
            "gamma_headway": np.array([f3, f2]),
            "g_headway": np.array([-1.0]),
            "g_speed": np.array([1.0, 0.0]),
        }[self.kind]

    def denominator(self) -> np.ndarray:
        f1, f2, f3 = self.coeffs.as_tuple()
        return np.array([1.0, f3 - f1, f2])


def build_block_matrices(c: LinearCoeffs) -> BlockMatrices:
    """Structural 2x2 blocks of the linearised vehicle dynamics."""
    return BlockMatrices(
        a_n0=np.array([[0.0, 1.0], [0.0, c.f3]]),
        a_n1=np.array([[0.0, -1.0], [c.f2, c.f1 - c.f3]]),
        b_v=np.array([0.0, 1.0]),
    )


def gamma_gain(c: LinearCoeffs, omega):
    """|Gamma(j*omega)| of the speed-to-speed transfer function.

    Accepts a scalar or an ndarray of frequencies [rad/s].
    """
    f1, f2, f3 = c.as_tuple()
    w2 = np.asarray(omega, dtype=float) ** 2
    num = w2 * f3**2 + f2**2
    den = (f2 - w2) ** 2 + w2 * (f3 - f1) ** 2
    out = np.sqrt(num / den)
    return float(out) if out.ndim == 0 else out


def string_stability_coefficient(c: LinearCoeffs) -> float:
    """S = f1^2 - 2*f1*f3 - 2*f2; non-negative iff L2 strictly string stable."""
    return c.f1**2 - 2.0 * c.f1 * c.f3 - 2.0 * c.f2


def hinf_second_order(c: LinearCoeffs) -> tuple[float, float]:
    """Exact H-infinity norm of Gamma and its peak frequency [rad/s].

    The squared gain is maximised in Omega = omega^2 where
    f3^2 * Omega^2 + 2*f2^2 * Omega + f2^2 * S = 0; for S >= 0 the
    supremum is the unit DC gain.
    """
    f1, f2, f3 = c.as_tuple()
    s_coeff = string_stability_coefficient(c)
    if s_coeff >= 0.0:
        return 1.0, 0.0
    if f3 == 0.0:
        omega_peak = math.sqrt(-s_coeff / 2.0)
    else:
        disc = f2**4 - f3**2 * f2**2 * s_coeff
        omega2 = (-(f2**2) + math.sqrt(disc)) / f3**2
        omega_peak = math.sqrt(omega2)
    return gamma_gain(c, omega_peak), omega_peak


@dataclass(frozen=True)
class TfChainGain:
    """H-infinity norm of a pointwise product of Gamma factors."""

    coeffs: tuple[LinearCoeffs, ...]
    gamma: float
    peak_freq: float


def chain_state_space(coeffs: list[LinearCoeffs]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Block-bidiagonal realization of the speed-to-speed chain map.

    Input is the speed perturbation entering the first vehicle of the window,
    output the speed perturbation of the last; the transfer function is the
    product of the per-vehicle Gamma factors.
    """
    q = len(coeffs)
    if q == 0:
        raise ValueError("empty coefficient list")
    A = np.zeros((2 * q, 2 * q))
    B = np.zeros((2 * q, 1))
    C = np.zeros((1, 2 * q))
    for k, c in enumerate(coeffs):
        blocks = build_block_matrices(c)
        A[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = blocks.a_n1
        if k > 0:
            A[2 * k : 2 * k + 2, 2 * k - 2 : 2 * k] = blocks.a_n0
    # only the speed component of the upstream vehicle enters the window
    B[0, 0] = 1.0
    B[1, 0] = coeffs[0].f3
    C[0, 2 * q - 1] = 1.0
    return A, B, C


def _hamiltonian(A: np.ndarray, B: np.ndarray, C: np.ndarray, gamma: float) -> np.ndarray:
    return np.block(
        [
            [A, (B @ B.T) / gamma],
            [-(C.T @ C) / gamma, -A.T],
        ]
    )


def _imaginary_crossings(
    A: np.ndarray, B: np.ndarray, C: np.ndarray, gamma: float, rel_tol: float = 1e-8
) -> np.ndarray:
    """Frequencies (>= 0) where the chain gain equals ``gamma``; empty if none."""
    eigs = np.linalg.eigvals(_hamiltonian(A, B, C, gamma))
    if not np.all(np.isfinite(eigs)):
        raise NumericalFailureError("Hamiltonian eigensolver returned non-finite values")
    mask = np.abs(eigs.real) <= rel_tol * np.maximum(1.0, np.abs(eigs))
    return np.unique(np.abs(eigs[mask].imag))


def _state_space_gain(A, B, C, omega: float) -> float:
    q = A.shape[0]
    return abs((C @ np.linalg.solve(1j * omega * np.eye(q) - A, B))[0, 0])


def hinf_chain(coeffs: list[LinearCoeffs], tol: float = 1e-8) -> TfChainGain:
    """H-infinity norm of the product of Gamma factors (evaluated pointwise,
    not the product of individual norms), via Hamiltonian bisection."""
    A, B, C = chain_state_space(coeffs)
    if np.any(np.linalg.eigvals(A).real >= 0):
        raise NumericalFailureError("unstable chain realization (infinite gain)")

    # attained-gain lower bound from a coarse closed-form sweep (incl. DC)
    grid = np.logspace(math.log10(OMEGA_MIN), math.log10(OMEGA_MAX), 512)
    gains = np.ones_like(grid)
    for c in coeffs:
        gains *= gamma_gain(c, grid)
    k = int(np.argmax(gains))
    lo = max(1.0, float(gains[k]))
    lo_freq = 0.0 if gains[k] <= 1.0 else float(grid[k])

    hi = lo * (1.0 + tol)
    for _ in range(80):
        if _imaginary_crossings(A, B, C, hi).size == 0:
            break
        lo, lo_freq = hi, lo_freq
        hi *= 2.0
    else:
        raise NumericalFailureError("H-infinity bisection failed to bracket")

    while hi - lo > tol * lo:
        mid = 0.5 * (lo + hi)
        cross = _imaginary_crossings(A, B, C, mid)
        if cross.size:
            lo = mid
            lo_freq = float(cross[int(np.argmax([_state_space_gain(A, B, C, w) for w in cross]))])
        else:
            hi = mid

    gamma = 0.5 * (lo + hi)
    peak = 0.0 if gamma <= 1.0 + 10.0 * tol and lo_freq < OMEGA_MIN else lo_freq
    return TfChainGain(tuple(coeffs), gamma, peak)


def bounded_real_check(coeffs: list[LinearCoeffs], gamma_bound: float) -> bool:
    """True iff the chain map has H-infinity norm strictly below ``gamma_bound``.

    Hamiltonian imaginary-axis eigenvalue test on the cascaded realization;
    an unstable realization is reported as infinite gain (always False).
    """
    if gamma_bound <= 0:
        raise ValueError("gamma_bound must be positive")
    A, B, C = chain_state_space(coeffs)
    if np.any(np.linalg.eigvals(A).real >= 0):
        return False
    return _imaginary_crossings(A, B, C, gamma_bound).size == 0


def mimo_sigma_max(c: LinearCoeffs, omega) -> float:
    """Largest singular value of the full 2x2 vehicle-to-vehicle map at omega."""
    f1, f2, f3 = c.as_tuple()
    w2 = np.asarray(omega, dtype=float) ** 2
    num = w2 * (1.0 + f3**2) + f2**2 + f1**2
    den = w2**2 + w2 * ((f3 - f1) ** 2 - 2.0 * f2) + f2**2
    out = np.sqrt(num / den)
    return float(out) if out.ndim == 0 else out


def mimo_sufficient_condition(c: LinearCoeffs) -> bool:
    """Sufficient MIMO strict-string-stability test; infeasible for any
    coefficients satisfying the realistic sign constraints."""
    return c.f1 == 0.0 and -2.0 * c.f2 - 1.0 >= 0.0


def linf_step_monotone(c: LinearCoeffs) -> bool:
    """True iff Gamma has a monotone step response (real poles).

    The negative-zero requirement -f2/f3 < 0 is forced by the sign
    constraints and asserted rather than tested.
    """
    assert c.f2 / c.f3 > 0.0
    return (c.f3 - c.f1) ** 2 - 4.0 * c.f2 >= 0.0


def impulse_l1_norm(c: LinearCoeffs) -> float:
    """L1 norm of Gamma's impulse response (the Linf-induced gain of Gamma),
    by adaptive quadrature of the closed-form response."""
    from scipy.integrate import quad

    f1, f2, f3 = c.as_tuple()
    poles = np.roots([1.0, f3 - f1, f2]).astype(complex)
    p1, p2 = poles
    if abs(p1 - p2) > 1e-9 * max(1.0, abs(p1)):
        r1 = (f3 * p1 + f2) / (p1 - p2)
        r2 = (f3 * p2 + f2) / (p2 - p1)

        def h(t):
            return (r1 * np.exp(p1 * t) + r2 * np.exp(p2 * t)).real
    else:

        def h(t):
            return ((f3 + (f3 * p1 + f2) * t) * np.exp(p1 * t)).real

    decay = -max(p1.real, p2.real)
    t_end = 60.0 / decay
    val, _ = quad(lambda t: abs(h(t)), 0.0, t_end, limit=500)
    return val


@dataclass
class StabilityReport:
    """Per-vehicle stability indicators plus chain weak-stability gains."""

    coeffs: list[LinearCoeffs]
    s_values: list[float]
    hinf: list[float]
    peak_freqs: list[float]
    l2_strict: list[bool]
    linf_monotone: list[bool]
    norm_equality: list[bool]  # f3^2 >= 2*f2
    mimo_sufficient: list[bool]
    chain_gains: dict[tuple[int, int], TfChainGain]

    def to_csv(self, path) -> None:
        """One row per vehicle, then one block per requested chain pair."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                [
                    "vehicle", "f1", "f2", "f3", "S", "hinf", "peak_freq",
                    "l2_strict", "linf_monotone", "norm_equality", "mimo_sufficient",
                ]
            )
            for i, c in enumerate(self.coeffs):
                w.writerow(
                    [
                        i + 1, c.f1, c.f2, c.f3, self.s_values[i], self.hinf[i],
                        self.peak_freqs[i], int(self.l2_strict[i]),
                        int(self.linf_monotone[i]), int(self.norm_equality[i]),
                        int(self.mimo_sufficient[i]),
                    ]
                )
            w.writerow([])
            w.writerow(["pair_l", "pair_n", "gamma", "peak_freq"])
            for (l, n), g in sorted(self.chain_gains.items()):
                w.writerow([l, n, g.gamma, g.peak_freq])

    def to_dict(self) -> dict:
        return {
            "vehicles": [
                {
                    "vehicle": i + 1,
                    "f1": c.f1, "f2": c.f2, "f3": c.f3,
                    "S": self.s_values[i],
                    "hinf": self.hinf[i],
                    "peak_freq": self.peak_freqs[i],
                    "l2_strict": self.l2_strict[i],
                    "linf_monotone": self.linf_monotone[i],
                    "norm_equality": self.norm_equality[i],
                    "mimo_sufficient": self.mimo_sufficient[i],
                }
                for i, c in enumerate(self.coeffs)
            ],
            "chain_gains": [
                {"l": l, "n": n, "gamma": g.gamma, "peak_freq": g.peak_freq}
                for (l, n), g in sorted(self.chain_gains.items())
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def analyze_chain(
    chain: VehicleChain, pairs: list[tuple[int, int]] | None = None
) -> StabilityReport:
    """Full per-vehicle and per-pair stability report for a vehicle chain.

    A pair (l, n) requests the weak-stability gain of the product over
    vehicles l+1..n (l = 0 addresses the virtual leader input).
    """
    pairs = pairs or []
    coeffs = chain.coeffs()
    m = len(coeffs)
    for l, n in pairs:
        if not (0 <= l < n <= m):
            raise ValueError(f"invalid chain pair ({l}, {n}) for {m} vehicles")
    s_values = [string_stability_coefficient(c) for c in coeffs]
    hinfs, peaks = zip(*(hinf_second_order(c) for c in coeffs))
    return StabilityReport(
        coeffs=coeffs,
        s_values=s_values,
        hinf=list(hinfs),
        peak_freqs=list(peaks),
        l2_strict=[s >= 0.0 for s in s_values],
        linf_monotone=[linf_step_monotone(c) for c in coeffs],
        norm_equality=[c.f3**2 >= 2.0 * c.f2 for c in coeffs],
        mimo_sufficient=[mimo_sufficient_condition(c) for c in coeffs],
        chain_gains={(l, n): hinf_chain(coeffs[l:n]) for l, n in pairs},
    )
