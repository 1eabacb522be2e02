"""Scenario configuration: TOML loading, validation, canonical hashing.

A scenario file is flat TOML with one table per concern. Required tables:
[constants], [agents], [cost_dist], [monte_carlo]. Optional: [sweep],
[penalty_curve], [train], [debug]. Every key is validated here so the
commands downstream never see a half-formed scenario.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import ConfigurationError, ValidationError
from ..model import (CostDistribution, EmpiricalCost, GaussianCost, MechanismConstants,
                     UniformCost)

_DIST_KINDS = ("gaussian-around-true-cost", "uniform-around-true-cost", "empirical-list")


@dataclass(frozen=True)
class CostDistSpec:
    """Recipe for building a per-agent competitor-cost distribution.

    Gaussian/uniform kinds are parameterized relative to each agent's true
    cost so one spec serves heterogeneous rosters; the empirical kind is an
    absolute shared list.
    """

    kind: str
    std_frac: float = 0.1
    floor_frac: float = 0.01
    lower_frac: float = 0.7
    upper_frac: float = 1.3
    values: tuple[float, ...] = ()

    def dist_for(self, true_cost: float) -> CostDistribution:
        if self.kind == "gaussian-around-true-cost":
            return GaussianCost(mean=true_cost, std=self.std_frac * true_cost,
                                floor=self.floor_frac * true_cost)
        if self.kind == "uniform-around-true-cost":
            return UniformCost(lower=self.lower_frac * true_cost,
                               upper=self.upper_frac * true_cost)
        return EmpiricalCost(values=self.values)


@dataclass(frozen=True)
class SweepSettings:
    max_pct: float = 50.0
    step_pct: float = 5.0
    agent_index: int = 0

    def grid(self) -> list[float]:
        steps = round(self.max_pct / self.step_pct)
        return [self.step_pct * i for i in range(-steps, steps + 1)]


@dataclass(frozen=True)
class PenaltyCurveSettings:
    grid_points: int = 101
    span: float = 2.0  # grid covers [0, span * m*]
    agent_index: int = 0


@dataclass(frozen=True)
class MonteCarloSettings:
    trials: int
    seed: int
    fixed_pool: int | None = None


@dataclass(frozen=True)
class TrainSettings:
    rounds: int
    local_steps: int
    epochs: int
    step_size: float
    dimension: int
    noise_variance: float
    lipschitz: float
    curvature_min: float
    start_offset: float = 1.0
    free_rider_index: int | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    constants: MechanismConstants
    true_costs: tuple[float, ...]
    cost_dist: CostDistSpec
    monte_carlo: MonteCarloSettings
    sweep: SweepSettings = field(default_factory=SweepSettings)
    penalty_curve: PenaltyCurveSettings = field(default_factory=PenaltyCurveSettings)
    train: TrainSettings | None = None
    debug_penalty_scale_factor: float = 1.0

    def canonical_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "constants": {"noise_scale": self.constants.noise_scale,
                          "ir_margin": self.constants.ir_margin,
                          "num_agents": self.constants.num_agents},
            "true_costs": list(self.true_costs),
            "cost_dist": {"kind": self.cost_dist.kind,
                          "std_frac": self.cost_dist.std_frac,
                          "floor_frac": self.cost_dist.floor_frac,
                          "lower_frac": self.cost_dist.lower_frac,
                          "upper_frac": self.cost_dist.upper_frac,
                          "values": list(self.cost_dist.values)},
            "monte_carlo": {"trials": self.monte_carlo.trials,
                            "seed": self.monte_carlo.seed,
                            "fixed_pool": self.monte_carlo.fixed_pool},
            "sweep": {"max_pct": self.sweep.max_pct, "step_pct": self.sweep.step_pct,
                      "agent_index": self.sweep.agent_index},
            "penalty_curve": {"grid_points": self.penalty_curve.grid_points,
                              "span": self.penalty_curve.span,
                              "agent_index": self.penalty_curve.agent_index},
            "debug_penalty_scale_factor": self.debug_penalty_scale_factor,
        }
        if self.train is not None:
            t = self.train
            d["train"] = {"rounds": t.rounds, "local_steps": t.local_steps,
                          "epochs": t.epochs, "step_size": t.step_size,
                          "dimension": t.dimension, "noise_variance": t.noise_variance,
                          "lipschitz": t.lipschitz, "curvature_min": t.curvature_min,
                          "start_offset": t.start_offset,
                          "free_rider_index": t.free_rider_index}
        return d

    def scenario_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _get(table: dict, section: str, key: str, kind, *, required: bool = True,
         default=None):
    if key not in table:
        if required:
            raise ConfigurationError(f"[{section}] is missing required key '{key}'")
        return default
    value = table[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(
                f"[{section}] {key} must be a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(
                f"[{section}] {key} must be an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigurationError(
                f"[{section}] {key} must be a string, got {value!r}")
        return value
    raise AssertionError(f"unsupported kind {kind}")


def parse_config(raw: dict, source: str = "<dict>") -> ScenarioConfig:
    """Validate a parsed TOML document into a ScenarioConfig."""
    known = {"constants", "agents", "cost_dist", "monte_carlo", "sweep",
             "penalty_curve", "train", "debug"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"{source}: unknown sections {sorted(unknown)}")
    for section in ("constants", "agents", "cost_dist", "monte_carlo"):
        if section not in raw:
            raise ConfigurationError(f"{source}: missing required section [{section}]")

    c = raw["constants"]
    try:
        constants = MechanismConstants(
            noise_scale=_get(c, "constants", "noise_scale", float),
            ir_margin=_get(c, "constants", "ir_margin", float),
            num_agents=_get(c, "constants", "num_agents", int))
    except ValidationError as e:
        raise ConfigurationError(f"{source}: [constants] {e}") from e

    a = raw["agents"]
    if "true_costs" in a:
        costs = a["true_costs"]
        if (not isinstance(costs, list) or not costs
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in costs)):
            raise ConfigurationError(f"{source}: [agents] true_costs must be a "
                                     f"nonempty list of numbers")
        true_costs = tuple(float(v) for v in costs)
    else:
        cost = _get(a, "agents", "true_cost", float)
        true_costs = (cost,) * constants.num_agents
    if len(true_costs) != constants.num_agents:
        raise ConfigurationError(
            f"{source}: {len(true_costs)} true costs for {constants.num_agents} agents")
    for v in true_costs:
        if not (math.isfinite(v) and v > 0):
            raise ConfigurationError(f"{source}: true costs must be finite and > 0, "
                                     f"got {v!r}")

    d = raw["cost_dist"]
    kind = _get(d, "cost_dist", "kind", str)
    if kind not in _DIST_KINDS:
        raise ConfigurationError(f"{source}: [cost_dist] kind must be one of "
                                 f"{_DIST_KINDS}, got {kind!r}")
    values = d.get("values", [])
    if not isinstance(values, list):
        raise ConfigurationError(f"{source}: [cost_dist] values must be a list")
    dist_spec = CostDistSpec(
        kind=kind,
        std_frac=_get(d, "cost_dist", "std_frac", float, required=False, default=0.1),
        floor_frac=_get(d, "cost_dist", "floor_frac", float, required=False,
                        default=0.01),
        lower_frac=_get(d, "cost_dist", "lower_frac", float, required=False,
                        default=0.7),
        upper_frac=_get(d, "cost_dist", "upper_frac", float, required=False,
                        default=1.3),
        values=tuple(float(v) for v in values))
    if kind == "empirical-list" and not dist_spec.values:
        raise ConfigurationError(f"{source}: [cost_dist] empirical-list needs values")
    if kind == "gaussian-around-true-cost":
        if dist_spec.std_frac <= 0 or dist_spec.floor_frac <= 0:
            raise ConfigurationError(f"{source}: [cost_dist] std_frac and floor_frac "
                                     f"must be > 0")
    if kind == "uniform-around-true-cost":
        if not 0 < dist_spec.lower_frac < dist_spec.upper_frac:
            raise ConfigurationError(f"{source}: [cost_dist] needs "
                                     f"0 < lower_frac < upper_frac")

    mc_raw = raw["monte_carlo"]
    mc = MonteCarloSettings(
        trials=_get(mc_raw, "monte_carlo", "trials", int),
        seed=_get(mc_raw, "monte_carlo", "seed", int),
        fixed_pool=_get(mc_raw, "monte_carlo", "fixed_pool", int, required=False))
    if mc.trials < 1:
        raise ConfigurationError(f"{source}: [monte_carlo] trials must be >= 1")
    if mc.fixed_pool is not None and mc.fixed_pool < 2:
        raise ConfigurationError(f"{source}: [monte_carlo] fixed_pool must be >= 2")

    sweep = SweepSettings()
    if "sweep" in raw:
        s = raw["sweep"]
        sweep = SweepSettings(
            max_pct=_get(s, "sweep", "max_pct", float, required=False, default=50.0),
            step_pct=_get(s, "sweep", "step_pct", float, required=False, default=5.0),
            agent_index=_get(s, "sweep", "agent_index", int, required=False, default=0))
    if not (0 < sweep.step_pct <= sweep.max_pct < 100.0):
        raise ConfigurationError(
            f"{source}: [sweep] needs 0 < step_pct <= max_pct < 100 (reported costs "
            f"must stay positive), got step {sweep.step_pct!r} max {sweep.max_pct!r}")
    ratio = sweep.max_pct / sweep.step_pct
    if abs(ratio - round(ratio)) > 1e-9:
        raise ConfigurationError(
            f"{source}: [sweep] step_pct must divide max_pct so the grid is "
            f"symmetric and contains 0%")
    if not 0 <= sweep.agent_index < constants.num_agents:
        raise ConfigurationError(f"{source}: [sweep] agent_index out of range")

    pc = PenaltyCurveSettings()
    if "penalty_curve" in raw:
        p = raw["penalty_curve"]
        pc = PenaltyCurveSettings(
            grid_points=_get(p, "penalty_curve", "grid_points", int, required=False,
                             default=101),
            span=_get(p, "penalty_curve", "span", float, required=False, default=2.0),
            agent_index=_get(p, "penalty_curve", "agent_index", int, required=False,
                             default=0))
    if pc.grid_points < 3:
        raise ConfigurationError(f"{source}: [penalty_curve] grid_points must be >= 3")
    if not (math.isfinite(pc.span) and pc.span > 1.0):
        raise ConfigurationError(f"{source}: [penalty_curve] span must be > 1 so the "
                                 f"grid brackets the optimum")
    if not 0 <= pc.agent_index < constants.num_agents:
        raise ConfigurationError(f"{source}: [penalty_curve] agent_index out of range")

    train = None
    if "train" in raw:
        t = raw["train"]
        train = TrainSettings(
            rounds=_get(t, "train", "rounds", int),
            local_steps=_get(t, "train", "local_steps", int),
            epochs=_get(t, "train", "epochs", int),
            step_size=_get(t, "train", "step_size", float),
            dimension=_get(t, "train", "dimension", int),
            noise_variance=_get(t, "train", "noise_variance", float),
            lipschitz=_get(t, "train", "lipschitz", float),
            curvature_min=_get(t, "train", "curvature_min", float),
            start_offset=_get(t, "train", "start_offset", float, required=False,
                              default=1.0),
            free_rider_index=_get(t, "train", "free_rider_index", int, required=False))
        if train.rounds < 1 or train.local_steps < 1 or train.epochs < 1:
            raise ConfigurationError(f"{source}: [train] rounds, local_steps and "
                                     f"epochs must be >= 1")
        if train.dimension < 1:
            raise ConfigurationError(f"{source}: [train] dimension must be >= 1")
        if not (0 < train.curvature_min <= train.lipschitz):
            raise ConfigurationError(f"{source}: [train] needs "
                                     f"0 < curvature_min <= lipschitz")
        if train.noise_variance < 0:
            raise ConfigurationError(f"{source}: [train] noise_variance must be >= 0")
        if train.step_size <= 0:
            raise ConfigurationError(f"{source}: [train] step_size must be > 0")
        if train.free_rider_index is not None and not (
                0 <= train.free_rider_index < constants.num_agents):
            raise ConfigurationError(f"{source}: [train] free_rider_index out of range")
        # The mechanism's composite noise scale must be the same constant the
        # simulator realizes, or the two halves talk past each other.
        k_sim = train.step_size * train.noise_variance * train.lipschitz
        if abs(k_sim - constants.noise_scale) > 1e-9 * constants.noise_scale:
            raise ConfigurationError(
                f"{source}: [train] step_size * noise_variance * lipschitz = "
                f"{k_sim!r} must equal [constants] noise_scale = "
                f"{constants.noise_scale!r}")

    debug_factor = 1.0
    if "debug" in raw:
        debug_factor = _get(raw["debug"], "debug", "penalty_scale_factor", float,
                            required=False, default=1.0)
        if not (math.isfinite(debug_factor) and debug_factor > 0):
            raise ConfigurationError(f"{source}: [debug] penalty_scale_factor must be "
                                     f"finite and > 0")

    return ScenarioConfig(constants=constants, true_costs=true_costs,
                          cost_dist=dist_spec, monte_carlo=mc, sweep=sweep,
                          penalty_curve=pc, train=train,
                          debug_penalty_scale_factor=debug_factor)


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"{path}: TOML parse error: {e}") from e
    return parse_config(raw, source=str(path))


def with_overrides(cfg: ScenarioConfig, seed: int | None = None,
                   trials: int | None = None,
                   paper_scale: bool = False) -> ScenarioConfig:
    """Apply CLI overrides; --paper-scale restores the 100k-trial regime."""
    mc = cfg.monte_carlo
    if paper_scale:
        mc = replace(mc, trials=100_000)
    if trials is not None:
        if trials < 1:
            raise ConfigurationError(f"--trials must be >= 1, got {trials}")
        mc = replace(mc, trials=trials)
    if seed is not None:
        mc = replace(mc, seed=seed)
    return replace(cfg, monte_carlo=mc)
