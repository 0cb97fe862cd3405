"""Scenario configuration: YAML schema, strict validation, chain building.

Configs are plain YAML with a required ``schema_version`` field.  Unknown
keys are rejected so that typos fail loudly before any computation starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .chain import VehicleChain
from .idm import DEFAULT_BOUNDS, IdmParams, ParamDistribution, ParamLaw, sample_params
from .simulate import PrbsDisturbance, StepDisturbance
from .errors import ConfigError

__all__ = ["ScenarioConfig", "load_config"]

SCHEMA_VERSION = 1


def _require_keys(section: dict, allowed: set[str], required: set[str], where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(section)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


def _parse_law(node, name: str, default: ParamLaw) -> ParamLaw:
    if node is None:
        return default
    _require_keys(node, {"law", "mean", "std", "bounds"}, set(), f"distribution.{name}")
    bounds = node.get("bounds", default.bounds)
    try:
        return ParamLaw(
            law=node.get("law", default.law),
            mean=float(node.get("mean", default.mean)),
            std=float(node.get("std", default.std)),
            bounds=(float(bounds[0]), float(bounds[1])),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid distribution.{name}: {exc}") from exc


def _parse_distribution(node) -> ParamDistribution:
    defaults = ParamDistribution.ngsim_defaults()
    if node is None:
        return defaults
    _require_keys(
        node, {"a", "b", "T", "s0", "v_max", "length"}, set(), "distribution"
    )
    return ParamDistribution(
        a=_parse_law(node.get("a"), "a", defaults.a),
        b=_parse_law(node.get("b"), "b", defaults.b),
        T=_parse_law(node.get("T"), "T", defaults.T),
        s0=_parse_law(node.get("s0"), "s0", defaults.s0),
        v_max=float(node.get("v_max", defaults.v_max)),
        length=float(node.get("length", defaults.length)),
    )


def _parse_vehicle(node, dist: ParamDistribution, where: str) -> IdmParams:
    _require_keys(node, {"a", "b", "T", "s0", "v_max", "length"}, {"a", "b", "T", "s0"}, where)
    try:
        return IdmParams(
            a=float(node["a"]), b=float(node["b"]),
            T=float(node["T"]), s0=float(node["s0"]),
            v_max=float(node.get("v_max", dist.v_max)),
            length=float(node.get("length", dist.length)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid vehicle in {where}: {exc}") from exc


@dataclass
class ChainSpec:
    v_eq: float
    size: int | None = None
    vehicles: list[IdmParams] | None = None
    av_positions: list[int] | None = None
    av_fraction: float | None = None


@dataclass
class GridSpec:
    x_param: str
    x_range: tuple[float, float]
    y_param: str
    y_range: tuple[float, float]
    steps: int = 50
    base: dict = field(default_factory=dict)


@dataclass
class AnalysisSpec:
    pairs: list[tuple[int, int]] = field(default_factory=list)
    grid: GridSpec | None = None


@dataclass
class SimulationSpec:
    duration: float = 240.0
    dt: float = 0.01


@dataclass
class OptimizationSpec:
    alpha: float = 1e3
    budget: int = 5000
    free_params: tuple[str, ...] = ("a", "b", "T")
    upstream: int = 1
    downstream: int = 2
    t_upper: float | None = None
    sigma_mode: str = "inverse_variance"
    fictitious: list[tuple[IdmParams, str]] = field(default_factory=list)
    seeds: list[int] | None = None
    fractions: list[float] | None = None


@dataclass
class RingSpec:
    size: int | None = None
    coeffs: list[tuple[float, float, float]] | None = None


@dataclass
class ScenarioConfig:
    seed: int = 0
    output: str | None = None
    distribution: ParamDistribution = field(
        default_factory=ParamDistribution.ngsim_defaults
    )
    chain: ChainSpec | None = None
    disturbance: StepDisturbance | PrbsDisturbance | None = None
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    optimization: OptimizationSpec = field(default_factory=OptimizationSpec)
    ring: RingSpec = field(default_factory=RingSpec)
    sample_count: int = 1

    def build_chain(self, seed: int | None = None) -> VehicleChain:
        """Materialise the vehicle chain (explicit params or a sampled draw)."""
        spec = self.chain
        if spec is None:
            raise ConfigError("config has no 'chain' section")
        rng = np.random.default_rng(self.seed if seed is None else seed)
        if spec.vehicles is not None:
            params = list(spec.vehicles)
        elif spec.size is not None:
            params = sample_params(self.distribution, rng, spec.size)
        else:
            raise ConfigError("chain needs either 'vehicles' or 'size'")
        m = len(params)
        automated = [False] * m
        if spec.av_positions is not None:
            for v in spec.av_positions:
                if not (1 <= v <= m):
                    raise ConfigError(f"av position {v} outside chain of {m}")
                automated[v - 1] = True
        elif spec.av_fraction:
            n_av = int(round(spec.av_fraction * m))
            perm = rng.permutation(np.arange(2, m + 1))
            for v in perm[:n_av]:
                automated[int(v) - 1] = True
        return VehicleChain(params, spec.v_eq, automated)


def _parse_chain(node, dist: ParamDistribution) -> ChainSpec:
    _require_keys(
        node,
        {"v_eq", "size", "vehicles", "av_positions", "av_fraction"},
        {"v_eq"},
        "chain",
    )
    vehicles = None
    if "vehicles" in node:
        vehicles = [
            _parse_vehicle(v, dist, f"chain.vehicles[{i}]")
            for i, v in enumerate(node["vehicles"])
        ]
    if vehicles is None and "size" not in node:
        raise ConfigError("chain needs either 'vehicles' or 'size'")
    if "av_positions" in node and "av_fraction" in node:
        raise ConfigError("chain: give av_positions or av_fraction, not both")
    return ChainSpec(
        v_eq=float(node["v_eq"]),
        size=int(node["size"]) if "size" in node else None,
        vehicles=vehicles,
        av_positions=[int(v) for v in node["av_positions"]]
        if "av_positions" in node
        else None,
        av_fraction=float(node["av_fraction"]) if "av_fraction" in node else None,
    )


def _parse_disturbance(node, default_seed: int):
    kind = node.get("kind")
    if kind == "step":
        _require_keys(
            node, {"kind", "vehicle", "amplitude", "t_on", "t_off"},
            {"vehicle", "amplitude", "t_on", "t_off"}, "disturbance",
        )
        return StepDisturbance(
            vehicle=int(node["vehicle"]),
            amplitude=float(node["amplitude"]),
            t_on=float(node["t_on"]),
            t_off=float(node["t_off"]),
        )
    if kind == "prbs":
        _require_keys(
            node,
            {"kind", "vehicle", "amplitude", "hold_range", "duration", "seed"},
            {"vehicle", "amplitude"},
            "disturbance",
        )
        hold = node.get("hold_range", [2.0, 5.0])
        return PrbsDisturbance(
            vehicle=int(node["vehicle"]),
            amplitude=float(node["amplitude"]),
            hold_range=(float(hold[0]), float(hold[1])),
            duration=float(node.get("duration", 60.0)),
            seed=int(node.get("seed", default_seed)),
        )
    raise ConfigError(f"disturbance.kind must be 'step' or 'prbs', got {kind!r}")


def _parse_analysis(node) -> AnalysisSpec:
    _require_keys(node, {"pairs", "grid"}, set(), "analysis")
    pairs = [(int(p[0]), int(p[1])) for p in node.get("pairs", [])]
    grid = None
    if "grid" in node:
        g = node["grid"]
        _require_keys(
            g, {"x_param", "x_range", "y_param", "y_range", "steps", "base"},
            {"x_param", "x_range", "y_param", "y_range"}, "analysis.grid",
        )
        grid = GridSpec(
            x_param=str(g["x_param"]),
            x_range=(float(g["x_range"][0]), float(g["x_range"][1])),
            y_param=str(g["y_param"]),
            y_range=(float(g["y_range"][0]), float(g["y_range"][1])),
            steps=int(g.get("steps", 50)),
            base=dict(g.get("base", {})),
        )
    return AnalysisSpec(pairs=pairs, grid=grid)


def _parse_optimization(node, dist: ParamDistribution, seed: int) -> OptimizationSpec:
    _require_keys(
        node,
        {
            "alpha", "budget", "free_params", "window", "t_upper",
            "sigma_mode", "fictitious", "seeds", "fractions",
        },
        set(),
        "optimization",
    )
    fictitious = []
    for i, f in enumerate(node.get("fictitious", [])):
        _require_keys(
            f, {"a", "b", "T", "s0", "v_max", "length", "position"},
            {"a", "b", "T", "s0"}, f"optimization.fictitious[{i}]",
        )
        position = f.get("position", "upstream")
        if position not in ("upstream", "downstream"):
            raise ConfigError("fictitious position must be upstream or downstream")
        fictitious.append(
            (_parse_vehicle({k: v for k, v in f.items() if k != "position"}, dist,
                            f"optimization.fictitious[{i}]"), position)
        )
    window = node.get("window", [1, 2])
    return OptimizationSpec(
        alpha=float(node.get("alpha", 1e3)),
        budget=int(node.get("budget", 5000)),
        free_params=tuple(node.get("free_params", ("a", "b", "T"))),
        upstream=int(window[0]),
        downstream=int(window[1]),
        t_upper=float(node["t_upper"]) if "t_upper" in node else None,
        sigma_mode=str(node.get("sigma_mode", "inverse_variance")),
        fictitious=fictitious,
        seeds=[int(s) for s in node["seeds"]] if "seeds" in node else None,
        fractions=[float(f) for f in node["fractions"]] if "fractions" in node else None,
    )


def _parse_ring(node) -> RingSpec:
    _require_keys(node, {"size", "coeffs"}, set(), "ring")
    coeffs = None
    if "coeffs" in node:
        coeffs = [(float(c[0]), float(c[1]), float(c[2])) for c in node["coeffs"]]
    return RingSpec(
        size=int(node["size"]) if "size" in node else None,
        coeffs=coeffs,
    )


def load_config(path: str | Path) -> ScenarioConfig:
    """Load and strictly validate a scenario YAML file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a mapping")
    _require_keys(
        raw,
        {
            "schema_version", "seed", "output", "distribution", "chain",
            "disturbance", "simulation", "analysis", "optimization", "ring",
            "sample_count",
        },
        {"schema_version"},
        "config",
    )
    if raw["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {raw['schema_version']} (expected {SCHEMA_VERSION})"
        )
    seed = int(raw.get("seed", 0))
    dist = _parse_distribution(raw.get("distribution"))
    cfg = ScenarioConfig(seed=seed, distribution=dist)
    cfg.output = raw.get("output")
    cfg.sample_count = int(raw.get("sample_count", 1))
    if "chain" in raw:
        cfg.chain = _parse_chain(raw["chain"], dist)
    if "disturbance" in raw:
        cfg.disturbance = _parse_disturbance(raw["disturbance"], seed)
    if "simulation" in raw:
        _require_keys(raw["simulation"], {"duration", "dt"}, set(), "simulation")
        cfg.simulation = SimulationSpec(
            duration=float(raw["simulation"].get("duration", 240.0)),
            dt=float(raw["simulation"].get("dt", 0.01)),
        )
    if "analysis" in raw:
        cfg.analysis = _parse_analysis(raw["analysis"])
    if "optimization" in raw:
        cfg.optimization = _parse_optimization(raw["optimization"], dist, seed)
    if "ring" in raw:
        cfg.ring = _parse_ring(raw["ring"])
    return cfg
