"""Server-side mechanism: penalty-scale assignment, penalty and fee
collection, the sandwich competition, and settlement accounting.

The competition grades each agent exactly once per round. Rosters are
randomly partitioned into triples (middle reported cost wins, ties broken
uniformly among the tied); any leftover agents are graded against two costs
sampled from a configured distribution. Only real agents' fees ever fund
payouts — sampled competitor costs are graders, not participants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InvariantViolation, ValidationError
from .loss import ContractFee, contract_fee, free_rider_penalty, penalty_scale_for
from .model import AgentProfile, CostDistribution, MechanismConstants, others_sum
from .rng import substream


@dataclass
class ServerLedger:
    """Running totals of money moved by the server."""

    penalties_collected: float = 0.0
    fees_collected: float = 0.0
    payouts_made: float = 0.0

    def add(self, other: "ServerLedger") -> None:
        self.penalties_collected += other.penalties_collected
        self.fees_collected += other.fees_collected
        self.payouts_made += other.payouts_made

    def feasible(self, rtol: float = 1e-9) -> bool:
        """payouts covered by collected fees (guaranteed for complete-triple
        rosters; can fail when a leftover agent wins, see settle)."""
        slack = rtol * max(1.0, abs(self.fees_collected))
        return self.payouts_made <= self.fees_collected + slack


@dataclass(frozen=True)
class CompetitionOutcome:
    """One competition round: who won, how, and (after settle) the money.

    groups lists complete triples in permutation order; leftover agents are
    graded against the sampled pairs in leftover_draws (aligned with
    leftover). fees_paid/payouts/totals stay None until settle fills them.
    deficit is the amount by which payouts exceeded collected fees (only
    possible with leftover winners; 0 otherwise).
    """

    won: tuple[bool, ...]
    groups: tuple[tuple[int, int, int], ...]
    leftover: tuple[int, ...]
    leftover_draws: tuple[tuple[float, float], ...]
    fees_paid: tuple[float, ...] | None = None
    payouts: tuple[float, ...] | None = None
    collected_total: float | None = None
    paid_total: float | None = None
    deficit: float = 0.0


def _check_roster(agents: Sequence[AgentProfile], constants: MechanismConstants) -> None:
    if len(agents) != constants.num_agents:
        raise ConfigurationError(
            f"roster has {len(agents)} agents but constants.num_agents = "
            f"{constants.num_agents}")


def _require_scales(agents: Sequence[AgentProfile]) -> None:
    for i, a in enumerate(agents):
        if a.penalty_scale is None:
            raise ConfigurationError(f"agent {i} has no penalty scale assigned")


def assign_penalty_scales(agents: Sequence[AgentProfile],
                          constants: MechanismConstants) -> list[AgentProfile]:
    """Return new profiles carrying server-assigned penalty scales.

    Assignment happens before any data is contributed, so the pool size each
    scale assumes is the sum of the *expected* optima sqrt(k/(2c_j)) of the
    other agents' reported costs.
    """
    _check_roster(agents, constants)
    k = constants.noise_scale
    expected = [math.sqrt(k / (2.0 * a.reported_cost)) for a in agents]
    total = sum(expected)
    out = []
    for i, a in enumerate(agents):
        pool = total - expected[i]
        if pool <= 0.0:
            raise ConfigurationError(
                f"agent {i}: expected contributions of all other agents sum to 0; "
                f"penalty scale is undefined")
        scale = penalty_scale_for(a.reported_cost, pool, k, constants.ir_margin)
        out.append(replace(a, penalty_scale=scale))
    return out


def collect_penalties(agents: Sequence[AgentProfile],
                      constants: MechanismConstants) -> tuple[list[float], ServerLedger]:
    """Charge every agent its free-rider penalty at its actual contribution."""
    _check_roster(agents, constants)
    _require_scales(agents)
    penalties = []
    for i, a in enumerate(agents):
        pool = others_sum(agents, i)
        penalties.append(free_rider_penalty(a.data_amount, a.reported_cost,
                                            a.penalty_scale, pool,
                                            constants.noise_scale))
    return penalties, ServerLedger(penalties_collected=float(sum(penalties)))


def collect_fees(agents: Sequence[AgentProfile],
                 constants: MechanismConstants) -> tuple[list[ContractFee], ServerLedger]:
    """Charge every agent its contract fee at its actual contribution.

    Raises DomainError for any agent contributing m = 0 — the fee formula
    divides by m; free riders must be kept out of the contract upstream.
    """
    _check_roster(agents, constants)
    _require_scales(agents)
    fees = []
    for i, a in enumerate(agents):
        pool = others_sum(agents, i)
        fees.append(contract_fee(a.data_amount, a.reported_cost, pool,
                                 constants.noise_scale, a.penalty_scale))
    return fees, ServerLedger(fees_collected=float(sum(f.total for f in fees)))


def win_probability(cost: float, dist: CostDistribution) -> float:
    """Chance that `cost` lands strictly between two independent draws:
    2 F(c) (1 - F(c)); at most 0.5, attained at the median."""
    if not (isinstance(cost, (int, float)) and math.isfinite(cost) and cost > 0):
        raise ValidationError(f"cost must be finite and > 0, got {cost!r}")
    f = dist.cdf(float(cost))
    return 2.0 * f * (1.0 - f)


def _sandwich_winner(group: Sequence[int], reported: Sequence[float],
                     rng) -> int:
    costs = sorted(reported[i] for i in group)
    middle = costs[1]
    tied = [i for i in group if reported[i] == middle]
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


def run_competition_triples(agents: Sequence[AgentProfile], constants: MechanismConstants,
                            seed: int,
                            leftover_dists: CostDistribution | Sequence[CostDistribution]
                            | None = None) -> CompetitionOutcome:
    """One competition round over a real roster.

    A seeded permutation partitions agents into triples; within each the
    middle reported cost wins (ties uniform among the tied). Agents left
    over when n % 3 != 0 are graded synthetically: they win iff their report
    falls strictly between two costs drawn from their distribution. Each
    agent competes exactly once. Identical seeds give bit-identical outcomes.
    """
    _check_roster(agents, constants)
    n = len(agents)
    if n < 3:
        raise ConfigurationError(f"competition needs at least 3 agents, got {n}")
    reported = [a.reported_cost for a in agents]
    rng = substream(seed, "competition-triples")
    perm = [int(i) for i in rng.permutation(n)]
    groups = tuple(tuple(perm[i:i + 3]) for i in range(0, n - n % 3, 3))
    leftover = tuple(perm[n - n % 3:])

    won = [False] * n
    for group in groups:
        won[_sandwich_winner(group, reported, rng)] = True

    draws = []
    if leftover:
        if leftover_dists is None:
            raise ConfigurationError(
                f"{len(leftover)} leftover agents need a cost distribution for "
                f"synthetic grading")
        for j in leftover:
            dist = (leftover_dists[j] if isinstance(leftover_dists, (list, tuple))
                    else leftover_dists)
            pair = dist.sample(substream(seed, "competition-leftover", j), 2)
            a, b = float(pair[0]), float(pair[1])
            won[j] = min(a, b) < reported[j] < max(a, b)
            draws.append((a, b))

    return CompetitionOutcome(won=tuple(won), groups=groups, leftover=leftover,
                              leftover_draws=tuple(draws))


@dataclass(frozen=True)
class SyntheticCompetitionResult:
    """Monte Carlo summary of the synthetic (sampled-pair) competition.

    mean_transfer is the per-agent average net payment into the mechanism at
    the competition stage: fee minus empirical win frequency times the
    (3/n)-share of everyone else's fees. Positive means the agent pays.
    """

    trials: int
    win_frequency: tuple[float, ...]
    mean_transfer: tuple[float, ...]
    fees: tuple[float, ...]


def run_competition_synthetic(agents: Sequence[AgentProfile],
                              constants: MechanismConstants,
                              dists: CostDistribution | Sequence[CostDistribution],
                              trials: int, seed: int,
                              fees: Sequence[float] | None = None,
                              fixed_pool: int | None = None) -> SyntheticCompetitionResult:
    """Grade every agent against `trials` sampled cost pairs.

    Each agent gets its own substream, and trial t of agent i is row t of
    that stream — reproducible regardless of evaluation order. By default
    every trial draws a fresh pair; with fixed_pool=N a pool of N costs is
    drawn once per agent and trials sample two distinct pool entries.
    """
    _check_roster(agents, constants)
    if not isinstance(trials, int) or isinstance(trials, bool) or trials < 1:
        raise ValidationError(f"trials must be an int >= 1, got {trials!r}")
    if fixed_pool is not None and fixed_pool < 2:
        raise ValidationError(f"fixed_pool must be >= 2, got {fixed_pool!r}")
    n = len(agents)
    if fees is None:
        collected, _ = collect_fees(agents, constants)
        fees = [f.total for f in collected]
    if len(fees) != n:
        raise ValidationError(f"need one fee per agent, got {len(fees)} for {n}")
    total_fees = float(sum(fees))

    freqs, transfers = [], []
    for i, agent in enumerate(agents):
        dist = dists[i] if isinstance(dists, (list, tuple)) else dists
        rng = substream(seed, "competition-synthetic", i)
        if fixed_pool is None:
            pairs = dist.sample(rng, (trials, 2))
        else:
            pool = dist.sample(rng, fixed_pool)
            first = rng.integers(0, fixed_pool, size=trials)
            second = rng.integers(0, fixed_pool - 1, size=trials)
            second = second + (second >= first)  # distinct indices, uniform
            pairs = np.stack([pool[first], pool[second]], axis=1)
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        c = agent.reported_cost
        p_hat = float(((lo < c) & (c < hi)).mean())
        share = (3.0 / constants.num_agents) * (total_fees - float(fees[i]))
        freqs.append(p_hat)
        transfers.append(float(fees[i]) - p_hat * share)
    return SyntheticCompetitionResult(trials=trials, win_frequency=tuple(freqs),
                                      mean_transfer=tuple(transfers), fees=tuple(fees))


def settle(outcome: CompetitionOutcome, fees: Sequence[float | ContractFee],
           constants: MechanismConstants) -> tuple[CompetitionOutcome, ServerLedger]:
    """Pay each winner (3/n) times the sum of everyone else's fees.

    Returns the completed outcome (fees_paid, payouts, totals) and a ledger
    delta holding payouts_made. For complete-triple rosters the identity
    paid = collected - (3/n) * sum(winners' own fees) makes overdraft
    impossible, and hitting one raises InvariantViolation. A winning
    leftover agent can genuinely overdraw the pool; that case is recorded
    in outcome.deficit rather than masked.
    """
    fee_vals = [f.total if isinstance(f, ContractFee) else float(f) for f in fees]
    n = constants.num_agents
    if len(fee_vals) != n or len(outcome.won) != n:
        raise ValidationError(
            f"settle needs fees and outcome for all {n} agents, got "
            f"{len(fee_vals)} fees / {len(outcome.won)} outcomes")
    collected = float(sum(fee_vals))
    payouts = [(3.0 / n) * (collected - fee_vals[i]) if outcome.won[i] else 0.0
               for i in range(n)]
    paid = float(sum(payouts))

    # Independent form of the same total, as an internal consistency check.
    winners_own = sum(fee_vals[i] for i in range(n) if outcome.won[i])
    expected_paid = (3.0 / n) * (sum(outcome.won) * collected - winners_own)
    if abs(paid - expected_paid) > 1e-9 * max(1.0, abs(collected)):
        raise InvariantViolation(
            f"settlement totals disagree: {paid!r} vs {expected_paid!r}")

    slack = 1e-9 * max(1.0, abs(collected))
    deficit = max(0.0, paid - collected)
    if deficit > slack:
        leftover_won = any(outcome.won[j] for j in outcome.leftover)
        if not leftover_won:
            raise InvariantViolation(
                f"payouts {paid!r} exceed collected fees {collected!r} with no "
                f"leftover winners; this should be impossible")
    completed = replace(outcome, fees_paid=tuple(fee_vals), payouts=tuple(payouts),
                        collected_total=collected, paid_total=paid,
                        deficit=deficit if deficit > slack else 0.0)
    return completed, ServerLedger(payouts_made=paid)
