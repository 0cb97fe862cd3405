"""Nonlinear time-domain simulation of open vehicle chains.

Fixed-step RK4 on the coupled car-following ODEs, with a virtual leader at
constant equilibrium speed.  Speeds are clamped at zero after each step
(the model itself has no zero-speed constraint); a vanishing net gap aborts
the run since the linear theory is void past contact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .chain import VehicleChain
from .idm import equilibrium_gap
from .errors import CollisionError, NumericalFailureError

__all__ = [
    "StepDisturbance",
    "PrbsDisturbance",
    "PrbsSignal",
    "Trajectory",
    "NormProfile",
    "prbs",
    "simulate",
    "norm_profile",
    "nonlinear_stability_sweep",
]

DEFAULT_DT = 0.01
DEFAULT_DURATION = 240.0


@dataclass(frozen=True)
class StepDisturbance:
    """Constant acceleration input on one vehicle over [t_on, t_off)."""

    vehicle: int  # 1-based index
    amplitude: float  # m/s^2
    t_on: float
    t_off: float

    def signal(self, t: float) -> float:
        return self.amplitude if self.t_on <= t < self.t_off else 0.0


@dataclass(frozen=True)
class PrbsSignal:
    """Piecewise-constant +/-amplitude signal with random hold lengths."""

    switch_times: np.ndarray  # ascending, starting at 0
    values: np.ndarray  # value held from switch_times[k] to switch_times[k+1]
    duration: float

    def __call__(self, t: float) -> float:
        if t < 0.0 or t >= self.duration:
            return 0.0
        k = int(np.searchsorted(self.switch_times, t, side="right")) - 1
        return float(self.values[k])


def prbs(
    amplitude: float,
    hold_range: tuple[float, float],
    duration: float,
    seed: int | np.random.Generator,
) -> PrbsSignal:
    """Pseudo-random binary excitation: +/-amplitude, holds uniform in
    ``hold_range`` seconds, deterministic per seed."""
    lo, hi = hold_range
    if not (0.0 < lo <= hi <= duration):
        raise ValueError("hold_range must lie within (0, duration]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    times = [0.0]
    while times[-1] < duration:
        times.append(times[-1] + rng.uniform(lo, hi))
    sign = 1.0 if rng.random() < 0.5 else -1.0
    values = sign * amplitude * (-1.0) ** np.arange(len(times) - 1)
    return PrbsSignal(np.array(times[:-1]), values, duration)


@dataclass(frozen=True)
class PrbsDisturbance:
    """PRBS acceleration input on one vehicle, active from t=0."""

    vehicle: int
    amplitude: float
    hold_range: tuple[float, float] = (2.0, 5.0)
    duration: float = 60.0
    seed: int = 0

    def make_signal(self) -> PrbsSignal:
        return prbs(self.amplitude, self.hold_range, self.duration, self.seed)


@dataclass
class Trajectory:
    """Time-indexed state of the chain; column 0 is the virtual leader."""

    t: np.ndarray  # (N,)
    pos: np.ndarray  # (N, m+1)
    speed: np.ndarray  # (N, m+1)
    accel: np.ndarray  # (N, m) followers only
    v_eq: float
    dt: float
    clamp_events: list[tuple[float, int]] = field(default_factory=list)

    @property
    def speed_perturbation(self) -> np.ndarray:
        """(N, m) speed deviations from equilibrium, vehicles 1..m."""
        return self.speed[:, 1:] - self.v_eq

    def to_csv(self, path) -> None:
        m = self.pos.shape[1] - 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["t"]
            for n in range(m + 1):
                header += [f"pos_{n}", f"speed_{n}"]
            w.writerow(header)
            for k in range(len(self.t)):
                row = [self.t[k]]
                for n in range(m + 1):
                    row += [self.pos[k, n], self.speed[k, n]]
                w.writerow(row)

    def clamp_log_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "vehicle"])
            w.writerows(self.clamp_events)


@dataclass(frozen=True)
class NormProfile:
    """Per-vehicle Euler-sum L2 and peak Linf norms of the speed perturbation."""

    l2: np.ndarray  # (m,)
    linf: np.ndarray  # (m,)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vehicle", "l2", "linf"])
            for i in range(len(self.l2)):
                w.writerow([i + 1, self.l2[i], self.linf[i]])


def _initial_state(chain: VehicleChain) -> tuple[np.ndarray, np.ndarray]:
    m = len(chain)
    pos = np.zeros(m + 1)
    for n, p in enumerate(chain.params, start=1):
        pos[n] = pos[n - 1] - equilibrium_gap(chain.v_eq, p) - p.length
    speed = np.full(m + 1, chain.v_eq)
    return pos, speed


def simulate(
    chain: VehicleChain,
    disturbance: StepDisturbance | PrbsDisturbance | None,
    duration: float = DEFAULT_DURATION,
    dt: float = DEFAULT_DT,
    initial_speeds: np.ndarray | None = None,
) -> Trajectory:
    """Integrate the chain with RK4 at fixed step ``dt``.

    The default initial condition is the exact equilibrium; ``initial_speeds``
    (length m, vehicles 1..m) overrides the follower speeds for perturbed-start
    studies.
    """
    if dt > 0.05:
        raise ValueError("dt must be <= 0.05 s")
    m = len(chain)
    a = np.array([p.a for p in chain.params])
    b = np.array([p.b for p in chain.params])
    T = np.array([p.T for p in chain.params])
    s0 = np.array([p.s0 for p in chain.params])
    v_max = np.array([p.v_max for p in chain.params])
    lengths = np.array([p.length for p in chain.params])
    two_sqrt_ab = 2.0 * np.sqrt(a * b)

    if disturbance is None:
        d_vehicle, d_signal = None, None
    elif isinstance(disturbance, PrbsDisturbance):
        d_vehicle, d_signal = disturbance.vehicle, disturbance.make_signal()
    else:
        d_vehicle, d_signal = disturbance.vehicle, disturbance.signal
    if d_vehicle is not None and not (1 <= d_vehicle <= m):
        raise ValueError(f"disturbance vehicle {d_vehicle} outside chain")

    def accel_of(t, pos, spd):
        gap = pos[:-1] - pos[1:] - lengths
        dv = spd[:-1] - spd[1:]
        v = spd[1:]
        s_star = s0 + np.maximum(0.0, v * T - v * dv / two_sqrt_ab)
        acc = a * (1.0 - (v / v_max) ** 4 - (s_star / gap) ** 2)
        if d_signal is not None:
            acc[d_vehicle - 1] += d_signal(t)
        return acc

    pos, spd = _initial_state(chain)
    if initial_speeds is not None:
        spd = spd.copy()
        spd[1:] = np.asarray(initial_speeds, dtype=float)

    n_steps = int(round(duration / dt))
    t_grid = np.arange(n_steps + 1) * dt
    pos_out = np.empty((n_steps + 1, m + 1))
    spd_out = np.empty((n_steps + 1, m + 1))
    acc_out = np.empty((n_steps + 1, m))
    pos_out[0], spd_out[0] = pos, spd
    acc_out[0] = accel_of(0.0, pos, spd)
    clamp_events: list[tuple[float, int]] = []

    v_lead = chain.v_eq
    for k in range(n_steps):
        t = k * dt

        def rhs(tau, state_pos, state_spd):
            dp = state_spd.copy()
            dp[0] = v_lead
            ds = np.empty_like(state_spd)
            ds[0] = 0.0
            ds[1:] = accel_of(tau, state_pos, state_spd)
            return dp, ds

        k1p, k1v = rhs(t, pos, spd)
        k2p, k2v = rhs(t + dt / 2, pos + dt / 2 * k1p, spd + dt / 2 * k1v)
        k3p, k3v = rhs(t + dt / 2, pos + dt / 2 * k2p, spd + dt / 2 * k2v)
        k4p, k4v = rhs(t + dt, pos + dt * k3p, spd + dt * k3v)
        pos = pos + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        spd = spd + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)

        clamped = spd < 0.0
        if clamped.any():
            for n in np.nonzero(clamped)[0]:
                clamp_events.append(((k + 1) * dt, int(n)))
            spd = np.where(clamped, 0.0, spd)

        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(spd))):
            raise NumericalFailureError(f"non-finite state at t={(k + 1) * dt:.3f}s")
        gaps = pos[:-1] - pos[1:] - lengths
        if np.any(gaps <= 0.0):
            raise CollisionError((k + 1) * dt, int(np.argmax(gaps <= 0.0)) + 1)

        pos_out[k + 1], spd_out[k + 1] = pos, spd
        acc_out[k + 1] = accel_of((k + 1) * dt, pos, spd)

    return Trajectory(
        t=t_grid, pos=pos_out, speed=spd_out, accel=acc_out,
        v_eq=chain.v_eq, dt=dt, clamp_events=clamp_events,
    )


def norm_profile(traj: Trajectory) -> NormProfile:
    """Euler-sum L2 and peak norms of the per-vehicle speed perturbation."""
    y = traj.speed_perturbation
    l2 = np.sqrt(np.sum(y**2, axis=0) * traj.dt)
    linf = np.max(np.abs(y), axis=0)
    return NormProfile(l2=l2, linf=linf)


def nonlinear_stability_sweep(
    chain: VehicleChain,
    amplitudes: list[float],
    duration: float = DEFAULT_DURATION,
    dt: float = DEFAULT_DT,
    t_on: float = 5.0,
    t_off: float = 10.0,
    vehicle: int = 1,
) -> dict[float, tuple[NormProfile, int]]:
    """Step-response norms per disturbance amplitude, plus clamp-event counts.

    Collision errors propagate (expected at extreme amplitudes).
    """
    out = {}
    for amp in amplitudes:
        traj = simulate(chain, StepDisturbance(vehicle, amp, t_on, t_off), duration, dt)
        out[amp] = (norm_profile(traj), len(traj.clamp_events))
    return out
