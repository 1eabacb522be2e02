"""Core value objects: mechanism constants, agent profiles, cost distributions.

Everything here is an immutable dataclass validated at construction time.
The composite noise scale bundles step size, gradient noise variance and
smoothness into the single product that the loss model depends on, so the
mechanism layer never needs the three factors separately.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


@dataclass(frozen=True)
class MechanismConstants:
    """Shared problem constants.

    noise_scale: composite product (step size x gradient noise variance x
        smoothness constant) that sets the convergence term k/(2m).
    ir_margin: fraction of the individual-rationality slack the server keeps
        as margin; must lie in [0, 2) or the penalty scale blows up.
    num_agents: roster size n (>= 2; transfers divide by n).
    """

    noise_scale: float
    ir_margin: float
    num_agents: int

    def __post_init__(self) -> None:
        _require(_finite(self.noise_scale) and self.noise_scale > 0,
                 f"noise_scale must be finite and > 0, got {self.noise_scale!r}")
        _require(_finite(self.ir_margin) and 0.0 <= self.ir_margin < 2.0,
                 f"ir_margin must lie in [0, 2), got {self.ir_margin!r}")
        _require(isinstance(self.num_agents, int) and not isinstance(self.num_agents, bool)
                 and self.num_agents >= 2,
                 f"num_agents must be an int >= 2, got {self.num_agents!r}")


@dataclass(frozen=True)
class AgentProfile:
    """One agent as the server sees it.

    true_cost is private marginal data cost; reported_cost is what the agent
    told the server (equal when truthful). data_amount is the sample count it
    actually contributes (0 = free rider). penalty_scale is the server-assigned
    penalty coefficient, None until assignment.
    """

    true_cost: float
    reported_cost: float
    data_amount: float
    penalty_scale: float | None = None

    def __post_init__(self) -> None:
        _require(_finite(self.true_cost) and self.true_cost > 0,
                 f"true_cost must be finite and > 0, got {self.true_cost!r}")
        _require(_finite(self.reported_cost) and self.reported_cost > 0,
                 f"reported_cost must be finite and > 0, got {self.reported_cost!r}")
        _require(_finite(self.data_amount) and self.data_amount >= 0,
                 f"data_amount must be finite and >= 0, got {self.data_amount!r}")
        if self.penalty_scale is not None:
            _require(_finite(self.penalty_scale) and self.penalty_scale >= 0,
                     f"penalty_scale must be finite and >= 0, got {self.penalty_scale!r}")

    @property
    def truthful(self) -> bool:
        return self.reported_cost == self.true_cost


@dataclass(frozen=True)
class LossBreakdown:
    """Loss decomposed into its mechanism components.

    total is derived in __post_init__, so total == convergence_term +
    data_cost + free_rider_penalty + competition_transfer holds bit-exactly
    by construction.
    """

    convergence_term: float
    data_cost: float
    free_rider_penalty: float
    competition_transfer: float
    total: float = field(init=False)

    def __post_init__(self) -> None:
        for name in ("convergence_term", "data_cost", "free_rider_penalty",
                     "competition_transfer"):
            v = getattr(self, name)
            _require(_finite(v), f"{name} must be finite, got {v!r}")
        object.__setattr__(
            self, "total",
            self.convergence_term + self.data_cost
            + self.free_rider_penalty + self.competition_transfer)


def others_sum(profiles: Sequence[AgentProfile], i: int) -> float:
    """Total data contributed by everyone except agent i."""
    if not isinstance(i, int) or isinstance(i, bool) or not (0 <= i < len(profiles)):
        raise ValidationError(f"agent index {i!r} out of range for {len(profiles)} profiles")
    return float(sum(p.data_amount for j, p in enumerate(profiles) if j != i))


class CostDistribution:
    """Distribution of competitor cost reports; supports sampling and exact CDF."""

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def median(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianCost(CostDistribution):
    """Gaussian cost distribution truncated below at a positive floor.

    Sampling resamples values at or below the floor; cdf() is the exact
    truncated CDF, consistent with that resampling.
    """

    mean: float
    std: float
    floor: float | None = None  # defaults to mean / 100

    def __post_init__(self) -> None:
        _require(_finite(self.mean) and self.mean > 0,
                 f"mean must be finite and > 0, got {self.mean!r}")
        _require(_finite(self.std) and self.std > 0,
                 f"std must be finite and > 0, got {self.std!r}")
        if self.floor is None:
            object.__setattr__(self, "floor", self.mean / 100.0)
        _require(_finite(self.floor) and self.floor > 0,
                 f"floor must be finite and > 0, got {self.floor!r}")
        # Keep the rejection loop sane: demand non-negligible mass above floor.
        _require(self._phi(self.floor) < 0.999999,
                 "floor leaves negligible probability mass; distribution is degenerate")

    def _phi(self, x: float) -> float:
        # standard normal CDF at the standardized point
        z = (x - self.mean) / self.std
        return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        out = rng.normal(self.mean, self.std, size=size)
        bad = out <= self.floor
        tries = 0
        while bad.any():
            out[bad] = rng.normal(self.mean, self.std, size=int(bad.sum()))
            bad = out <= self.floor
            tries += 1
            if tries > 10_000:  # unreachable given the mass check above
                raise ValidationError("resampling above the floor did not terminate")
        return out

    def cdf(self, x: float) -> float:
        if x <= self.floor:
            return 0.0
        lo = self._phi(self.floor)
        return (self._phi(x) - lo) / (1.0 - lo)

    def median(self) -> float:
        lo = self._phi(self.floor)
        p = lo + 0.5 * (1.0 - lo)
        return statistics.NormalDist(self.mean, self.std).inv_cdf(p)


@dataclass(frozen=True)
class UniformCost(CostDistribution):
    """Uniform cost distribution on [lower, upper], lower > 0."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        _require(_finite(self.lower) and self.lower > 0,
                 f"lower must be finite and > 0, got {self.lower!r}")
        _require(_finite(self.upper) and self.upper > self.lower,
                 f"upper must be finite and > lower, got {self.upper!r}")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=size)

    def cdf(self, x: float) -> float:
        if x <= self.lower:
            return 0.0
        if x >= self.upper:
            return 1.0
        return (x - self.lower) / (self.upper - self.lower)

    def median(self) -> float:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class EmpiricalCost(CostDistribution):
    """Empirical distribution over a fixed list of observed costs.

    Sampling draws uniformly with replacement; cdf() is the step CDF
    P(X <= x) = #{values <= x} / N.
    """

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        _require(len(self.values) > 0, "empirical distribution needs at least one value")
        for v in self.values:
            _require(_finite(v) and v > 0, f"empirical values must be finite and > 0, got {v!r}")
        object.__setattr__(self, "values", tuple(sorted(float(v) for v in self.values)))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        idx = rng.integers(0, len(self.values), size=size)
        return np.asarray(self.values, dtype=float)[idx]

    def cdf(self, x: float) -> float:
        arr = np.asarray(self.values)
        return float(np.searchsorted(arr, x, side="right")) / len(self.values)

    def median(self) -> float:
        return float(np.median(np.asarray(self.values)))
