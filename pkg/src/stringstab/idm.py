"""Intelligent Driver Model dynamics, equilibria, linearisation and sampling.

The IDM acceleration law is

    f(v, dx, dv) = a * [1 - (v / v_max)^4 - (s*(v, dv) / (dx - length))^2]
    s*(v, dv)    = s0 + max(0, v*T - v*dv / (2*sqrt(a*b)))

with dx the (bumper-to-bumper-plus-length) headway to the leader and
dv = v_leader - v the relative speed.  Around an equilibrium at speed
``v_eq`` the dynamics are characterised by the three partial derivatives
(f1, f2, f3) of f with respect to (v, dx, dv), which drive every linear
analysis downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import GapCollisionError, NoEquilibriumError, SamplingInfeasibleError

__all__ = [
    "IdmParams",
    "VehicleKinematics",
    "LinearCoeffs",
    "ParamLaw",
    "ParamDistribution",
    "DEFAULT_BOUNDS",
    "idm_acceleration",
    "equilibrium_gap",
    "linearize",
    "sample_params",
]

# Physical bounds used for truncation and optimisation (NGSIM-calibrated
# literature values).
DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "a": (0.3, 3.0),
    "b": (0.3, 3.0),
    "T": (0.3, 3.0),
    "s0": (0.5, 3.5),
}


@dataclass(frozen=True)
class IdmParams:
    """Behavioural parameter vector of one vehicle."""

    a: float  # max tolerated acceleration [m/s^2]
    b: float  # comfortable deceleration [m/s^2]
    T: float  # safe time headway [s]
    s0: float  # minimum stopping distance [m]
    v_max: float  # desired free-flow speed [m/s]
    length: float = 5.0  # vehicle length [m]

    def __post_init__(self):
        for name in ("a", "b", "T", "s0", "v_max", "length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"IdmParams.{name} must be strictly positive")

    def with_values(self, **kwargs) -> "IdmParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class VehicleKinematics:
    """Position and (non-negative) speed of one vehicle."""

    position: float
    speed: float

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be non-negative")


@dataclass(frozen=True)
class LinearCoeffs:
    """Equilibrium partial derivatives (f1, f2, f3) of the acceleration law."""

    f1: float  # d f / d v       [1/s],   negative
    f2: float  # d f / d dx      [1/s^2], positive
    f3: float  # d f / d dv      [1/s],   positive

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.f1, self.f2, self.f3)


def idm_acceleration(self: VehicleKinematics, leader: VehicleKinematics, p: IdmParams) -> float:
    """IDM acceleration of a vehicle following ``leader``."""
    gap = leader.position - self.position - p.length
    if gap <= 0:
        raise GapCollisionError(f"non-positive net gap {gap:.3f} m")
    v = self.speed
    dv = leader.speed - self.speed
    s_star = p.s0 + max(0.0, v * p.T - v * dv / (2.0 * math.sqrt(p.a * p.b)))
    return p.a * (1.0 - (v / p.v_max) ** 4 - (s_star / gap) ** 2)


def equilibrium_gap(v_eq: float, p: IdmParams) -> float:
    """Net gap at which a vehicle driving at ``v_eq`` has zero acceleration.

    Closed form obtained by setting the acceleration law to zero with dv=0:
    s_eq = (s0 + v_eq*T) / sqrt(1 - (v_eq / v_max)^4).
    """
    if v_eq < 0 or v_eq >= p.v_max:
        raise NoEquilibriumError(f"no equilibrium for v_eq={v_eq} with v_max={p.v_max}")
    return (p.s0 + v_eq * p.T) / math.sqrt(1.0 - (v_eq / p.v_max) ** 4)


def linearize(p: IdmParams, v_eq: float) -> LinearCoeffs:
    """Analytic partial derivatives of the IDM at the equilibrium (v_eq, s_eq, dv=0).

    The max(0, .) kink in s* is inactive at equilibrium since v_eq*T > 0,
    so the law is smooth there and the derivatives are exact.
    """
    s_eq = equilibrium_gap(v_eq, p)
    s_star = p.s0 + v_eq * p.T
    assert v_eq * p.T >= 0.0, "desired-gap kink active at equilibrium"
    sqrt_ab = math.sqrt(p.a * p.b)
    f1 = -p.a * (4.0 * v_eq**3 / p.v_max**4 + 2.0 * s_star * p.T / s_eq**2)
    f2 = 2.0 * p.a * s_star**2 / s_eq**3
    f3 = p.a * s_star * v_eq / (sqrt_ab * s_eq**2)
    return LinearCoeffs(f1, f2, f3)


def _lognormal_mu_sigma(mean: float, std: float) -> tuple[float, float]:
    # Moment inversion: the reported (mean, std) are of the log-normal
    # distribution itself, not of the underlying normal.
    sig2 = math.log(1.0 + (std / mean) ** 2)
    return math.log(mean) - 0.5 * sig2, math.sqrt(sig2)


@dataclass(frozen=True)
class ParamLaw:
    """Marginal law of one behavioural parameter with truncation bounds."""

    law: str  # "lognormal" | "normal"
    mean: float
    std: float
    bounds: tuple[float, float]

    def __post_init__(self):
        if self.law not in ("lognormal", "normal"):
            raise ValueError(f"unknown law {self.law!r}")
        if self.bounds[0] > self.bounds[1]:
            raise ValueError("lower bound exceeds upper bound")

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Rejection-sample ``count`` values inside the truncation bounds."""
        if self.std == 0.0:
            if not (self.bounds[0] <= self.mean <= self.bounds[1]):
                raise SamplingInfeasibleError("degenerate law outside truncation box")
            return np.full(count, self.mean)
        out = np.empty(count)
        filled = 0
        drawn = 0
        while filled < count:
            batch = max(count - filled, 64)
            if self.law == "lognormal":
                mu, sig = _lognormal_mu_sigma(self.mean, self.std)
                x = rng.lognormal(mu, sig, batch)
            else:
                x = rng.normal(self.mean, self.std, batch)
            x = x[(x >= self.bounds[0]) & (x <= self.bounds[1])]
            drawn += batch
            take = min(len(x), count - filled)
            out[filled : filled + take] = x[:take]
            filled += take
            if drawn >= 10_000 and filled / drawn < 1e-4:
                raise SamplingInfeasibleError(
                    f"acceptance rate {filled / drawn:.2e} below 1e-4"
                )
        return out


@dataclass(frozen=True)
class ParamDistribution:
    """Joint (independent-marginal) population distribution of IDM parameters."""

    a: ParamLaw
    b: ParamLaw
    T: ParamLaw
    s0: ParamLaw
    v_max: float = 33.0
    length: float = 5.0

    @staticmethod
    def ngsim_defaults(
        a_bounds=(0.3, 3.0),
        b_bounds=(0.3, 3.0),
        T_bounds=(0.3, 3.0),
        s0_bounds=(0.5, 3.5),
    ) -> "ParamDistribution":
        """US101 morning-peak calibration statistics."""
        return ParamDistribution(
            a=ParamLaw("lognormal", 0.77, 0.42, a_bounds),
            b=ParamLaw("lognormal", 1.1, 0.43, b_bounds),
            T=ParamLaw("normal", 1.5, 0.57, T_bounds),
            s0=ParamLaw("normal", 2.0, 0.5, s0_bounds),
        )

    @property
    def mean_params(self) -> IdmParams:
        return IdmParams(
            a=self.a.mean, b=self.b.mean, T=self.T.mean, s0=self.s0.mean,
            v_max=self.v_max, length=self.length,
        )

    def stds(self) -> dict[str, float]:
        return {"a": self.a.std, "b": self.b.std, "T": self.T.std, "s0": self.s0.std}


def sample_params(
    dist: ParamDistribution, seed: int | np.random.Generator, count: int
) -> list[IdmParams]:
    """Draw ``count`` parameter vectors, truncated to the distribution bounds."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cols = {name: getattr(dist, name).sample(rng, count) for name in ("a", "b", "T", "s0")}
    return [
        IdmParams(
            a=cols["a"][i], b=cols["b"][i], T=cols["T"][i], s0=cols["s0"][i],
            v_max=dist.v_max, length=dist.length,
        )
        for i in range(count)
    ]
