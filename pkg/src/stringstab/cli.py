"""Command-line front end.

Subcommands: analyze | simulate | optimize | ring | sample.
Exit codes: 0 ok, 2 config/usage error, 3 computation error, 4 collision.
All outputs are plot-ready CSV (plus JSON for machine consumption); reruns
with the same config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import ring as ring_mod
from .config import ScenarioConfig, load_config
from .idm import IdmParams, LinearCoeffs, linearize, sample_params
from .optimize import (
    ExperimentConfig,
    SaConfig,
    experiment_30,
    optimize_chain_avs,
)
from .simulate import norm_profile, simulate
from .transfer import analyze_chain, hinf_second_order, string_stability_coefficient
from .errors import CollisionError, ConfigError, StringstabError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTE = 3
EXIT_COLLISION = 4


def _out_dir(cfg: ScenarioConfig, args) -> Path:
    out = Path(args.out or cfg.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid_csv(cfg: ScenarioConfig, out: Path) -> None:
    grid = cfg.analysis.grid
    base = {
        "a": cfg.distribution.a.mean, "b": cfg.distribution.b.mean,
        "T": cfg.distribution.T.mean, "s0": cfg.distribution.s0.mean,
        "v_max": cfg.distribution.v_max, "length": cfg.distribution.length,
    }
    base.update(grid.base)
    v_eq = cfg.chain.v_eq
    xs = np.linspace(*grid.x_range, grid.steps)
    ys = np.linspace(*grid.y_range, grid.steps)
    with open(out / "s_grid.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([grid.x_param, grid.y_param, "S"])
        for x in xs:
            for y in ys:
                p = IdmParams(**{**base, grid.x_param: float(x), grid.y_param: float(y)})
                s = string_stability_coefficient(linearize(p, v_eq))
                w.writerow([x, y, s])


def cmd_analyze(cfg: ScenarioConfig, args) -> int:
    chain = cfg.build_chain(args.seed)
    out = _out_dir(cfg, args)
    report = analyze_chain(chain, cfg.analysis.pairs)
    report.to_csv(out / "stability_report.csv")
    report.to_json(out / "stability_report.json")
    for i, (s, g) in enumerate(zip(report.s_values, report.hinf)):
        print(
            f"vehicle {i + 1}: S={s:+.4f}  hinf={g:.4f}  "
            f"{'strictly stable' if s >= 0 else 'strictly unstable'}"
        )
    for (l, n), g in sorted(report.chain_gains.items()):
        verdict = "weakly stable" if g.gamma <= 1.0 + 1e-6 else "weakly unstable"
        print(f"pair ({l},{n}): gamma={g.gamma:.4f}  {verdict}")
    if cfg.analysis.grid is not None:
        _grid_csv(cfg, out)
        print(f"stability-coefficient grid written to {out / 's_grid.csv'}")
    return EXIT_OK


def cmd_simulate(cfg: ScenarioConfig, args) -> int:
    chain = cfg.build_chain(args.seed)
    out = _out_dir(cfg, args)
    dt = args.dt or cfg.simulation.dt
    traj = simulate(chain, cfg.disturbance, cfg.simulation.duration, dt)
    profile = norm_profile(traj)
    traj.to_csv(out / "trajectory.csv")
    traj.clamp_log_to_csv(out / "clamp_events.csv")
    profile.to_csv(out / "norm_profile.csv")
    print(
        f"simulated {len(chain)} vehicles for {cfg.simulation.duration}s "
        f"(dt={dt}); {len(traj.clamp_events)} zero-speed clamps"
    )
    print(f"L2 at last vehicle: {profile.l2[-1]:.4f}")
    return EXIT_OK


def cmd_optimize(cfg: ScenarioConfig, args) -> int:
    out = _out_dir(cfg, args)
    opt = cfg.optimization
    bounds = None
    if opt.t_upper is not None:
        from .idm import DEFAULT_BOUNDS

        bounds = dict(DEFAULT_BOUNDS)
        bounds["T"] = (bounds["T"][0], opt.t_upper)
    if opt.seeds is not None:
        exp_cfg = ExperimentConfig(
            dist=cfg.distribution,
            n_vehicles=cfg.chain.size if cfg.chain and cfg.chain.size else 30,
            v_eq=cfg.chain.v_eq if cfg.chain else 11.0,
            sa=SaConfig(budget=opt.budget),
            alpha=opt.alpha,
            free_params=opt.free_params,
            upstream=opt.upstream,
            downstream=opt.downstream,
            sigma_mode=opt.sigma_mode,
            fictitious=opt.fictitious,
            duration=cfg.simulation.duration,
            dt=args.dt or cfg.simulation.dt,
        )
        if bounds is not None:
            exp_cfg.bounds = bounds
        report = experiment_30(
            exp_cfg, opt.seeds, opt.fractions or [0.0, 0.1, 0.2, 0.3],
            threads=args.threads,
        )
        report.to_csv(out / "experiment.csv")
        report.summary_to_csv(out / "optimized_params.csv")
        failures = [c for c in report.cells if c.error is not None]
        for c in failures:
            print(f"cell seed={c.seed} fraction={c.fraction} failed: {c.error}")
        shifts = report.parameter_shift_medians()
        for name, (ref, opt_med) in shifts.items():
            print(f"median {name}: reference {ref:.3f} -> optimized {opt_med:.3f}")
        return EXIT_OK

    chain = cfg.build_chain(args.seed)
    kwargs = dict(
        free_params=opt.free_params,
        upstream=opt.upstream,
        downstream=opt.downstream,
        alpha=opt.alpha,
        sigma_mode=opt.sigma_mode,
        fictitious=opt.fictitious,
    )
    if bounds is not None:
        kwargs["bounds"] = bounds
    tuned, results = optimize_chain_avs(
        chain, cfg.distribution.stds(), SaConfig(budget=opt.budget),
        seed=args.seed if args.seed is not None else cfg.seed, **kwargs,
    )
    with open(out / "optimized_params.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vehicle", "param", "reference", "optimized", "gamma"])
        for n, res in results:
            for name in ("a", "b", "T", "s0"):
                w.writerow(
                    [
                        n, name, getattr(chain.params[n - 1], name),
                        getattr(res.theta_star, name), res.gamma_star,
                    ]
                )
    for n, res in results:
        print(f"AV {n}: gamma {res.gamma_star:.4f}, objective {res.objective_value:.2f}")
    if not results:
        print("no automated vehicles flagged; nothing to optimize")
    return EXIT_OK


def cmd_ring(cfg: ScenarioConfig, args) -> int:
    out = _out_dir(cfg, args)
    if cfg.ring.coeffs is not None:
        coeffs = [LinearCoeffs(*c) for c in cfg.ring.coeffs]
        if cfg.ring.size is not None and len(coeffs) == 1:
            coeffs = coeffs * cfg.ring.size
    else:
        chain = cfg.build_chain(args.seed)
        coeffs = chain.coeffs()
    sys_ = ring_mod.ring_matrix(coeffs)
    stable = ring_mod.ring_asymptotically_stable(sys_)
    ring_mod.dump_spectrum_csv(sys_, out / "ring_spectrum.csv")
    open_gains = [hinf_second_order(c)[0] for c in coeffs]
    open_unstable = any(g > 1.0 + 1e-9 for g in open_gains)
    ring_word = "stable ring" if stable else "unstable ring"
    chain_word = "string-unstable open chain" if open_unstable else "string-stable open chain"
    print(f"{ring_word}, {chain_word}")
    print(f"spectrum written to {out / 'ring_spectrum.csv'}")
    return EXIT_OK


def cmd_sample(cfg: ScenarioConfig, args) -> int:
    out = _out_dir(cfg, args)
    seed = args.seed if args.seed is not None else cfg.seed
    params = sample_params(cfg.distribution, seed, cfg.sample_count)
    with open(out / "sampled_params.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vehicle", "a", "b", "T", "s0", "v_max", "length"])
        for i, p in enumerate(params):
            w.writerow([i + 1, p.a, p.b, p.T, p.s0, p.v_max, p.length])
    print(f"{len(params)} parameter sets written to {out / 'sampled_params.csv'}")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "ring": cmd_ring,
    "sample": cmd_sample,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stringstab",
        description="String-stability analysis, simulation and AV tuning "
        "for heterogeneous car-following traffic",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="scenario YAML file")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--dt", type=float, default=None, help="override time step")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CollisionError as exc:
        print(f"collision: {exc}", file=sys.stderr)
        return EXIT_COLLISION
    except StringstabError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
