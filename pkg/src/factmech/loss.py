"""Loss model for penalized federated training with contract fees.

Agents trade off a convergence term k/(2 * data) against linear data cost
c*m. The server adds a quadratic free-rider penalty whose vertex sits just
above the self-interested optimum, charges a contract fee equal to the
federation benefit minus that penalty, and pays competition winners a share
of everyone else's fees. All functions here are scalar, pure, and validated;
Monte Carlo layers above call them per-branch rather than per-trial.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DegeneratePenaltyError, DomainError, SingularityError, ValidationError
from .model import LossBreakdown


class CompetitionBranch(enum.Enum):
    """Outcome of the sandwich competition for one agent."""
    WON = "won"
    LOST = "lost"


@dataclass(frozen=True)
class ContractFee:
    """Contract fee split into its published parts.

    effective is the federation-benefit term k*sum_others / (2m(m+sum_others));
    total subtracts the free-rider penalty already collected, so downstream
    accounting only ever moves `total`.
    """
    total: float
    effective: float


def _check(value: float, name: str, *, positive: bool = False, nonneg: bool = False) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(v):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    if positive and not v > 0:
        raise DomainError(f"{name} must be > 0, got {value!r}")
    if nonneg and v < 0:
        raise DomainError(f"{name} must be >= 0, got {value!r}")
    return v


def local_loss(m: float, cost: float, noise_scale: float) -> float:
    """Standalone training loss: noise_scale/(2m) + cost*m."""
    m = _check(m, "m", positive=True)
    cost = _check(cost, "cost", positive=True)
    noise_scale = _check(noise_scale, "noise_scale", positive=True)
    return noise_scale / (2.0 * m) + cost * m


def federated_loss(m: float, sum_others: float, cost: float, noise_scale: float) -> float:
    """Plain federation loss: the convergence term is shared, data cost is not."""
    m = _check(m, "m", nonneg=True)
    sum_others = _check(sum_others, "sum_others", nonneg=True)
    cost = _check(cost, "cost", positive=True)
    noise_scale = _check(noise_scale, "noise_scale", positive=True)
    pool = m + sum_others
    if pool <= 0:
        raise DomainError("federated loss needs m + sum_others > 0")
    return noise_scale / (2.0 * pool) + cost * m


def penalty_scale_for(cost: float, sum_others: float, noise_scale: float,
                      ir_margin: float) -> float:
    """Penalty coefficient that leaves the agent an (ir_margin/2)-scaled slice
    of its individual-rationality slack.

    Always >= 0 for ir_margin in [0, 2); undefined when nobody else
    contributes (the formula divides by sum_others).
    """
    cost = _check(cost, "cost", positive=True)
    sum_others = _check(sum_others, "sum_others", nonneg=True)
    noise_scale = _check(noise_scale, "noise_scale", positive=True)
    ir_margin = _check(ir_margin, "ir_margin")
    if not 0.0 <= ir_margin < 2.0:
        raise ValidationError(f"ir_margin must lie in [0, 2), got {ir_margin!r}")
    if sum_others == 0.0:
        raise SingularityError("penalty scale is undefined with no other contributors")
    m_star = math.sqrt(noise_scale / (2.0 * cost))
    pool = sum_others + m_star
    factor = cost - noise_scale / (2.0 * pool * pool)
    return m_star * pool / ((2.0 - ir_margin) * noise_scale * sum_others) * factor * factor


def free_rider_penalty(m: float, reported_cost: float, penalty_scale: float,
                       sum_others: float, noise_scale: float) -> float:
    """Quadratic under-contribution penalty, evaluated at the reported cost.

    penalty_scale * (c/(2 lam) - k/(4 lam (m_c + sum_others)^2) + m_c - m)^2
    with m_c = sqrt(k/(2c)) the optimum implied by the report. Zero penalty
    scale is rejected: the vertex offset divides by it.
    """
    m = _check(m, "m", nonneg=True)
    reported_cost = _check(reported_cost, "reported_cost", positive=True)
    penalty_scale = _check(penalty_scale, "penalty_scale", nonneg=True)
    sum_others = _check(sum_others, "sum_others", nonneg=True)
    noise_scale = _check(noise_scale, "noise_scale", positive=True)
    if penalty_scale == 0.0:
        raise DegeneratePenaltyError("free-rider penalty is undefined for penalty_scale = 0")
    m_c = math.sqrt(noise_scale / (2.0 * reported_cost))
    pool = m_c + sum_others
    arg = (reported_cost / (2.0 * penalty_scale)
           - noise_scale / (4.0 * penalty_scale * pool * pool)
           + m_c - m)
    return penalty_scale * arg * arg


def pfl_loss(m: float, true_cost: float, reported_cost: float, penalty_scale: float,
             sum_others: float, noise_scale: float) -> LossBreakdown:
    """Penalized federated loss: shared convergence term, true data cost,
    plus the free-rider penalty evaluated at the reported cost."""
    m = _check(m, "m", nonneg=True)
    true_cost = _check(true_cost, "true_cost", positive=True)
    sum_others = _check(sum_others, "sum_others", nonneg=True)
    noise_scale = _check(noise_scale, "noise_scale", positive=True)
    pool = m + sum_others
    if pool <= 0:
        raise DomainError("pfl loss needs m + sum_others > 0")
    penalty = free_rider_penalty(m, reported_cost, penalty_scale, sum_others, noise_scale)
    return LossBreakdown(
        convergence_term=noise_scale / (2.0 * pool),
        data_cost=true_cost * m,
        free_rider_penalty=penalty,
        competition_transfer=0.0,
    )


def ir_gap_analytic(m_star: float, sum_others: float, noise_scale: float,
                    ir_margin: float) -> float:
    """Closed-form slack between local and penalized-federated loss at the
    optimum: (ir_margin/4) * k * sum_others / (m* (sum_others + m*))."""
    m_star = _check(m_star, "m_star", positive=True)
    sum_others = _check(sum_others, "sum_others", nonneg=True)
    noise_scale = _check(noise_scale, "noise_scale", positive=True)
    ir_margin = _check(ir_margin, "ir_margin")
    if not 0.0 <= ir_margin < 2.0:
        raise ValidationError(f"ir_margin must lie in [0, 2), got {ir_margin!r}")
    return (ir_margin / 4.0) * noise_scale * sum_others / (m_star * (sum_others + m_star))


def contract_fee(m: float, reported_cost: float, sum_others: float, noise_scale: float,
                 penalty_scale: float) -> ContractFee:
    """Participation fee: federation benefit at m minus the penalty already due.

    The effective term k*sum_others/(2m(m+sum_others)) is exactly
    local_loss(m) - federated_loss(m); subtracting the penalty keeps the
    agent's all-in cost equal to its standalone loss on the lost branch.
    """
    m = _check(m, "m", positive=True)
    sum_others = _check(sum_others, "sum_others", nonneg=True)
    noise_scale = _check(noise_scale, "noise_scale", positive=True)
    effective = noise_scale * sum_others / (2.0 * m * (m + sum_others))
    penalty = free_rider_penalty(m, reported_cost, penalty_scale, sum_others, noise_scale)
    return ContractFee(total=effective - penalty, effective=effective)


def fact_loss(m: float, true_cost: float, reported_cost: float, penalty_scale: float,
              sum_others: float, noise_scale: float, branch: CompetitionBranch,
              others_fee_sum: float, num_agents: int) -> LossBreakdown:
    """All-in loss for one realized competition outcome.

    Lost branch: penalized federated loss plus the contract fee — which
    telescopes to exactly the standalone loss at the true cost, whatever m
    and whatever was reported. Won branch additionally receives
    (3/num_agents) * others_fee_sum.
    """
    if not isinstance(branch, CompetitionBranch):
        raise ValidationError(f"branch must be a CompetitionBranch, got {branch!r}")
    others_fee_sum = _check(others_fee_sum, "others_fee_sum")
    if not isinstance(num_agents, int) or isinstance(num_agents, bool) or num_agents < 2:
        raise ValidationError(f"num_agents must be an int >= 2, got {num_agents!r}")
    base = pfl_loss(m, true_cost, reported_cost, penalty_scale, sum_others, noise_scale)
    fee = contract_fee(m, reported_cost, sum_others, noise_scale, penalty_scale)
    transfer = fee.total
    if branch is CompetitionBranch.WON:
        transfer -= (3.0 / num_agents) * others_fee_sum
    return LossBreakdown(
        convergence_term=base.convergence_term,
        data_cost=base.data_cost,
        free_rider_penalty=base.free_rider_penalty,
        competition_transfer=transfer,
    )


def _validate_expectation_args(m, true_cost, reported_cost, penalty_scale, sum_others,
                               noise_scale, win_prob, others_fee_sum, num_agents):
    m = _check(m, "m", positive=True)
    true_cost = _check(true_cost, "true_cost", positive=True)
    reported_cost = _check(reported_cost, "reported_cost", positive=True)
    penalty_scale = _check(penalty_scale, "penalty_scale", nonneg=True)
    if penalty_scale == 0.0:
        raise DegeneratePenaltyError("expected FACT loss is undefined for penalty_scale = 0")
    sum_others = _check(sum_others, "sum_others", nonneg=True)
    noise_scale = _check(noise_scale, "noise_scale", positive=True)
    win_prob = _check(win_prob, "win_prob")
    if not 0.0 <= win_prob <= 1.0:
        raise ValidationError(f"win_prob must lie in [0, 1], got {win_prob!r}")
    others_fee_sum = _check(others_fee_sum, "others_fee_sum")
    if not isinstance(num_agents, int) or isinstance(num_agents, bool) or num_agents < 2:
        raise ValidationError(f"num_agents must be an int >= 2, got {num_agents!r}")
    return (m, true_cost, reported_cost, penalty_scale, sum_others, noise_scale,
            win_prob, others_fee_sum, num_agents)


def expected_fact_loss(m: float, true_cost: float, reported_cost: float,
                       penalty_scale: float, sum_others: float, noise_scale: float,
                       win_prob: float, others_fee_sum: float, num_agents: int) -> float:
    """Expectation of fact_loss over the win/lose branch, in simplified form.

    The penalty and fee cancel between branches, leaving
    local_loss(m, true_cost) - (3 win_prob / n) * others_fee_sum. The report,
    penalty scale and pool size drop out entirely; they are still validated
    so both routes accept the same inputs.
    """
    (m, true_cost, _, _, _, noise_scale, win_prob, others_fee_sum,
     num_agents) = _validate_expectation_args(
        m, true_cost, reported_cost, penalty_scale, sum_others, noise_scale,
        win_prob, others_fee_sum, num_agents)
    return (noise_scale / (2.0 * m) + true_cost * m
            - (3.0 * win_prob / num_agents) * others_fee_sum)


def expected_fact_loss_mixture(m: float, true_cost: float, reported_cost: float,
                               penalty_scale: float, sum_others: float, noise_scale: float,
                               win_prob: float, others_fee_sum: float,
                               num_agents: int) -> float:
    """Same expectation computed the long way: win_prob-weighted mixture of the
    two realized branches. Kept as an independent route for cross-checks."""
    (m, true_cost, reported_cost, penalty_scale, sum_others, noise_scale, win_prob,
     others_fee_sum, num_agents) = _validate_expectation_args(
        m, true_cost, reported_cost, penalty_scale, sum_others, noise_scale,
        win_prob, others_fee_sum, num_agents)
    won = fact_loss(m, true_cost, reported_cost, penalty_scale, sum_others, noise_scale,
                    CompetitionBranch.WON, others_fee_sum, num_agents).total
    lost = fact_loss(m, true_cost, reported_cost, penalty_scale, sum_others, noise_scale,
                     CompetitionBranch.LOST, others_fee_sum, num_agents).total
    return win_prob * won + (1.0 - win_prob) * lost
