"""Behavioural-parameter tuning of automated vehicles.

The weak-string-stability level gamma of a neighbourhood window around each
automated vehicle is minimised together with a comfort penalty (Mahalanobis
distance of the tuned parameters from the driver's reference parameters),
subject to box bounds.  The outer search over the car-following parameters is
simulated annealing; the inner L2-gain evaluation is the exact H-infinity
norm of the window product, whose feasibility certificate is the
bounded-real (Hamiltonian) test.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .chain import VehicleChain
from .idm import DEFAULT_BOUNDS, IdmParams, ParamDistribution, linearize, sample_params
from .simulate import PrbsDisturbance, norm_profile, simulate
from .transfer import bounded_real_check, hinf_chain
from .errors import NoEquilibriumError, OptimizationFailedError

__all__ = [
    "SaConfig",
    "OptimizationProblem",
    "OptimizationResult",
    "objective",
    "optimize_av",
    "optimize_chain_avs",
    "worst_case_augment",
    "ExperimentConfig",
    "ExperimentCell",
    "ExperimentReport",
    "experiment_30",
]

DEFAULT_FREE_PARAMS = ("a", "b", "T")


@dataclass(frozen=True)
class SaConfig:
    """Geometric-cooling simulated-annealing schedule."""

    budget: int = 5000
    t0: float = 1.0
    cooling_ratio: float = 0.97
    cooling_interval: int = 50  # proposals per temperature stage
    step_fraction: float = 0.1  # proposal std as fraction of box width


@dataclass
class OptimizationProblem:
    """Single-AV tuning problem over a neighbourhood window.

    The window (i, j) spans the vehicles whose parameters are assumed known;
    the constrained gain is that of the product of their speed-to-speed
    transfer functions (input: speed of vehicle i-1, output: speed of j).
    """

    chain: VehicleChain
    av_index: int  # 1-based vehicle n
    theta_hat: IdmParams  # reference (comfort) parameters
    stds: dict[str, float]  # population standard deviations
    free_params: tuple[str, ...] = DEFAULT_FREE_PARAMS
    bounds: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BOUNDS)
    )
    upstream: int = 1  # i = n - upstream
    downstream: int = 2  # j = n + downstream
    alpha: float = 1e3
    sigma_mode: str = "inverse_variance"  # or "inverse_std" (literal weighting)
    fictitious: list[tuple[IdmParams, str]] = field(default_factory=list)

    def __post_init__(self):
        m = len(self.chain)
        if not (1 <= self.av_index <= m):
            raise ValueError(f"av_index {self.av_index} outside chain of {m}")
        if self.sigma_mode not in ("inverse_variance", "inverse_std"):
            raise ValueError(f"unknown sigma_mode {self.sigma_mode!r}")
        for name in self.free_params:
            lo, hi = self.bounds[name]
            if not (lo <= getattr(self.theta_hat, name) <= hi):
                raise ValueError(f"theta_hat.{name} outside the admissible box")
            if self.stds[name] <= 0:
                raise ValueError(f"std of free parameter {name} must be positive")

    @property
    def window(self) -> tuple[int, int]:
        m = len(self.chain)
        return (
            max(1, self.av_index - self.upstream),
            min(m, self.av_index + self.downstream),
        )

    def window_coeffs(self, theta: IdmParams) -> list:
        """Gamma coefficients of the window product with vehicle n set to
        ``theta`` and any fictitious vehicles inserted."""
        i, j = self.window
        chain = self.chain.replace_vehicle(self.av_index, theta)
        coeffs = [linearize(chain.params[k - 1], chain.v_eq) for k in range(i, j + 1)]
        for wc, position in self.fictitious:
            wc_c = linearize(wc, chain.v_eq)
            if position == "upstream":
                coeffs.insert(0, wc_c)
            else:
                coeffs.append(wc_c)
        return coeffs

    def penalty(self, theta: IdmParams) -> float:
        k = len(self.free_params)
        total = 0.0
        for name in self.free_params:
            d = getattr(theta, name) - getattr(self.theta_hat, name)
            sd = self.stds[name]
            w = 1.0 / sd**2 if self.sigma_mode == "inverse_variance" else 1.0 / sd
            total += w * d * d
        return total / k


@dataclass
class OptimizationResult:
    theta_star: IdmParams
    gamma_star: float
    objective_value: float
    accepted: int
    rejected: int
    best_trace: list[float]
    window: tuple[int, int]


def objective(theta: IdmParams, problem: OptimizationProblem) -> tuple[float, float]:
    """(alpha*gamma + comfort penalty, gamma) for a candidate parameter set.

    Raises NoEquilibriumError for candidates without an equilibrium at the
    chain speed; the annealer treats that as an infeasible proposal.
    """
    gamma = hinf_chain(problem.window_coeffs(theta)).gamma
    return problem.alpha * gamma + problem.penalty(theta), gamma


def worst_case_augment(
    problem: OptimizationProblem, wc_params: IdmParams, position: str = "upstream"
) -> OptimizationProblem:
    """Problem copy whose gain evaluation includes a fictitious worst-case
    vehicle adjacent to the window."""
    if position not in ("upstream", "downstream"):
        raise ValueError("position must be 'upstream' or 'downstream'")
    aug = replace(problem)
    aug.fictitious = list(problem.fictitious) + [(wc_params, position)]
    return aug


def _reflect(x: float, lo: float, hi: float) -> float:
    width = hi - lo
    if width == 0.0:
        return lo
    period = 2.0 * width
    r = (x - lo) % period
    return lo + (r if r <= width else period - r)


def optimize_av(
    problem: OptimizationProblem,
    sa_config: SaConfig = SaConfig(),
    seed: int | np.random.Generator = 0,
) -> OptimizationResult:
    """Simulated annealing over the free parameter subset within the box."""
    if sa_config.budget < 1:
        raise ValueError("SA budget must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    names = problem.free_params
    lows = np.array([problem.bounds[n][0] for n in names])
    highs = np.array([problem.bounds[n][1] for n in names])
    steps = sa_config.step_fraction * (highs - lows)

    def pack(theta: IdmParams) -> np.ndarray:
        return np.array([getattr(theta, n) for n in names])

    def unpack(x: np.ndarray) -> IdmParams:
        return problem.theta_hat.with_values(**dict(zip(names, x)))

    current_x = pack(problem.theta_hat)
    try:
        current_val, current_gamma = objective(unpack(current_x), problem)
    except NoEquilibriumError as exc:
        raise OptimizationFailedError("reference parameters infeasible") from exc

    best_x, best_val, best_gamma = current_x.copy(), current_val, current_gamma
    best_trace = [best_val]
    accepted = rejected = 0
    temperature = sa_config.t0

    for it in range(sa_config.budget):
        if it > 0 and it % sa_config.cooling_interval == 0:
            temperature *= sa_config.cooling_ratio
        cand = current_x + rng.normal(0.0, 1.0, len(names)) * steps
        cand = np.array([_reflect(v, lo, hi) for v, lo, hi in zip(cand, lows, highs)])
        try:
            cand_val, cand_gamma = objective(unpack(cand), problem)
        except NoEquilibriumError:
            rejected += 1
            best_trace.append(best_val)
            continue
        delta = cand_val - current_val
        if delta <= 0.0 or rng.random() < math.exp(-delta / max(temperature, 1e-12)):
            current_x, current_val, current_gamma = cand, cand_val, cand_gamma
            accepted += 1
        else:
            rejected += 1
        if current_val < best_val:
            best_x, best_val, best_gamma = current_x.copy(), current_val, current_gamma
        best_trace.append(best_val)

    theta_star = unpack(best_x)
    assert bounded_real_check(problem.window_coeffs(theta_star), best_gamma + 1e-6)
    return OptimizationResult(
        theta_star=theta_star,
        gamma_star=best_gamma,
        objective_value=best_val,
        accepted=accepted,
        rejected=rejected,
        best_trace=best_trace,
        window=problem.window,
    )


def optimize_chain_avs(
    chain: VehicleChain,
    stds: dict[str, float],
    sa_config: SaConfig = SaConfig(),
    seed: int = 0,
    **problem_kwargs,
) -> tuple[VehicleChain, list[tuple[int, OptimizationResult]]]:
    """Optimise every flagged AV sequentially in index order; each AV sees the
    already-optimised parameters of upstream AVs in its window."""
    results = []
    current = chain
    for n in range(1, len(chain) + 1):
        if not chain.automated[n - 1]:
            continue
        problem = OptimizationProblem(
            chain=current,
            av_index=n,
            theta_hat=current.params[n - 1],
            stds=stds,
            **problem_kwargs,
        )
        av_seed = np.random.default_rng(np.random.SeedSequence([seed, n]))
        res = optimize_av(problem, sa_config, av_seed)
        current = current.replace_vehicle(n, res.theta_star)
        results.append((n, res))
    return current, results


@dataclass
class ExperimentConfig:
    """Randomised multi-seed PRBS experiment on a sampled vehicle string."""

    dist: ParamDistribution = field(default_factory=ParamDistribution.ngsim_defaults)
    n_vehicles: int = 30
    v_eq: float = 11.0
    prbs_amplitude: float = 1.0
    prbs_hold: tuple[float, float] = (2.0, 5.0)
    prbs_duration: float = 60.0
    duration: float = 240.0
    dt: float = 0.01
    sa: SaConfig = field(default_factory=SaConfig)
    alpha: float = 1e3
    free_params: tuple[str, ...] = DEFAULT_FREE_PARAMS
    upstream: int = 1
    downstream: int = 2
    bounds: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BOUNDS)
    )
    sigma_mode: str = "inverse_variance"
    fictitious: list[tuple[IdmParams, str]] = field(default_factory=list)


@dataclass
class ExperimentCell:
    seed: int
    fraction: float
    av_positions: list[int]
    l2: np.ndarray | None
    linf: np.ndarray | None
    rel_l2: np.ndarray | None  # relative to the fraction-0 baseline, same seed
    optimized: list[tuple[int, IdmParams, IdmParams, float]]  # (veh, ref, opt, gamma)
    error: str | None = None


@dataclass
class ExperimentReport:
    cells: list[ExperimentCell]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "fraction", "vehicle", "l2", "linf", "rel_l2"])
            for cell in self.cells:
                if cell.error is not None:
                    continue
                for v in range(len(cell.l2)):
                    w.writerow(
                        [
                            cell.seed, cell.fraction, v + 1,
                            cell.l2[v], cell.linf[v],
                            cell.rel_l2[v] if cell.rel_l2 is not None else "",
                        ]
                    )

    def summary_to_csv(self, path) -> None:
        """Optimised-vs-reference parameter shifts (one row per AV and
        parameter)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "fraction", "vehicle", "param", "reference", "optimized", "gamma"])
            for cell in self.cells:
                for veh, ref, opt, gamma in cell.optimized:
                    for name in ("a", "b", "T", "s0"):
                        w.writerow(
                            [
                                cell.seed, cell.fraction, veh, name,
                                getattr(ref, name), getattr(opt, name), gamma,
                            ]
                        )

    def parameter_shift_medians(self) -> dict[str, tuple[float, float]]:
        """(reference median, optimised median) per tuned parameter."""
        out = {}
        for name in ("a", "b", "T"):
            refs = [getattr(r, name) for c in self.cells for _, r, _, _ in c.optimized]
            opts = [getattr(o, name) for c in self.cells for _, _, o, _ in c.optimized]
            if refs:
                out[name] = (float(np.median(refs)), float(np.median(opts)))
        return out


def _run_experiment_seed(
    config: ExperimentConfig, seed: int, fractions: list[float]
) -> list[ExperimentCell]:
    rng = np.random.default_rng(seed)
    params = sample_params(config.dist, rng, config.n_vehicles)
    # vehicle 1 is forced non-automated; AV positions nest across fractions
    perm = rng.permutation(np.arange(2, config.n_vehicles + 1))
    prbs_seed = int(rng.integers(2**31))
    disturbance = PrbsDisturbance(
        vehicle=1,
        amplitude=config.prbs_amplitude,
        hold_range=config.prbs_hold,
        duration=config.prbs_duration,
        seed=prbs_seed,
    )
    stds = config.dist.stds()

    cells: list[ExperimentCell] = []
    baseline_l2: np.ndarray | None = None
    for fraction in sorted(fractions):
        n_av = int(round(fraction * config.n_vehicles))
        positions = sorted(int(v) for v in perm[:n_av])
        automated = [v + 1 in positions for v in range(config.n_vehicles)]
        chain = VehicleChain(list(params), config.v_eq, automated)
        try:
            optimized_info = []
            if n_av > 0:
                chain, results = optimize_chain_avs(
                    chain,
                    stds,
                    config.sa,
                    seed=seed,
                    free_params=config.free_params,
                    bounds=config.bounds,
                    upstream=config.upstream,
                    downstream=config.downstream,
                    alpha=config.alpha,
                    sigma_mode=config.sigma_mode,
                    fictitious=config.fictitious,
                )
                optimized_info = [
                    (n, params[n - 1], res.theta_star, res.gamma_star)
                    for n, res in results
                ]
            traj = simulate(chain, disturbance, config.duration, config.dt)
            profile = norm_profile(traj)
            rel = None
            if fraction == 0.0:
                baseline_l2 = profile.l2
            elif baseline_l2 is not None:
                rel = (profile.l2 - baseline_l2) / baseline_l2
            cells.append(
                ExperimentCell(
                    seed=seed, fraction=fraction, av_positions=positions,
                    l2=profile.l2, linf=profile.linf, rel_l2=rel,
                    optimized=optimized_info,
                )
            )
        except Exception as exc:  # keep remaining cells running
            cells.append(
                ExperimentCell(
                    seed=seed, fraction=fraction, av_positions=positions,
                    l2=None, linf=None, rel_l2=None, optimized=[],
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return cells


def experiment_30(
    config: ExperimentConfig,
    seeds: list[int],
    fractions: list[float] = (0.0, 0.1, 0.2, 0.3),
    threads: int = 1,
) -> ExperimentReport:
    """Run the seed x AV-fraction grid; seeds are shared across fractions so
    each cell is comparable with its own fraction-0 baseline."""
    fractions = list(fractions)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_seed = list(
                pool.map(
                    _run_experiment_seed,
                    [config] * len(seeds),
                    seeds,
                    [fractions] * len(seeds),
                )
            )
    else:
        per_seed = [_run_experiment_seed(config, s, fractions) for s in seeds]
    return ExperimentReport([cell for cells in per_seed for cell in cells])
