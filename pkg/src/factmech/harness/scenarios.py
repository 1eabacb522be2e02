"""Scenario runners behind the CLI's artifact commands.

Deviation studies (sweep, joint argmin) are unilateral: the studied agent
varies its report/contribution while every other agent sits at the truthful
equilibrium, and the fee pool funding competition payouts is the equilibrium
pool. The tiny feedback of one agent's report on *other* agents' penalty
scales is a second-order mechanism effect deliberately outside the objective
being scanned.

Monte Carlo estimators exploit that per-trial losses take only two values
(won/lost). The lost value equals the standalone loss identically — the
telescoping is exact algebra, independently verified by the test suite — so
net improvement is computed as win_frequency x (3/n) x fee pool. Rows whose
win count is zero are exactly zero, not 1e-21-noise-ordered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import __version__
from ..equilibrium import optimal_local_data
from ..errors import ConfigurationError
from ..fedsim import (SyntheticTask, TrainingRun, convergence_bound, run_pfl_training)
from ..loss import (CompetitionBranch, contract_fee, fact_loss, free_rider_penalty,
                    local_loss, federated_loss, pfl_loss)
from ..mechanism import (CompetitionOutcome, ServerLedger, assign_penalty_scales,
                         collect_penalties, run_competition_triples, settle,
                         win_probability)
from ..model import AgentProfile, LossBreakdown, others_sum
from ..rng import substream
from .config import ScenarioConfig
from .table import ResultTable


def base_metadata(cfg: ScenarioConfig) -> dict[str, str]:
    return {
        "artifact_version": __version__,
        "scenario_hash": cfg.scenario_hash(),
        "seed": str(cfg.monte_carlo.seed),
    }


def build_agents(cfg: ScenarioConfig, misreport_pct: dict[int, float] | None = None,
                 free_rider_index: int | None = None) -> list[AgentProfile]:
    """Roster at the self-interested equilibrium: every agent contributes its
    standalone optimum, reports truthfully unless told otherwise."""
    agents = []
    for i, cost in enumerate(cfg.true_costs):
        pct = (misreport_pct or {}).get(i, 0.0)
        reported = cost * (1.0 + pct / 100.0)
        if reported <= 0:
            raise ConfigurationError(f"misreport of {pct}% drives agent {i}'s "
                                     f"reported cost non-positive")
        m = 0.0 if i == free_rider_index else optimal_local_data(
            cost, cfg.constants.noise_scale)
        agents.append(AgentProfile(true_cost=cost, reported_cost=reported,
                                   data_amount=m))
    return agents


def assign_scales_with_debug(agents: Sequence[AgentProfile],
                             cfg: ScenarioConfig) -> list[AgentProfile]:
    """Server-side scale assignment, with the config's debug corruption factor
    applied afterwards (1.0 in any honest run)."""
    assigned = assign_penalty_scales(agents, cfg.constants)
    f = cfg.debug_penalty_scale_factor
    if f != 1.0:
        assigned = [replace(a, penalty_scale=a.penalty_scale * f) for a in assigned]
    return assigned


def equilibrium_fees(cfg: ScenarioConfig) -> tuple[list[AgentProfile], list[float]]:
    """Truthful-equilibrium roster with scales, and each agent's fee total."""
    agents = assign_scales_with_debug(build_agents(cfg), cfg)
    k = cfg.constants.noise_scale
    fees = []
    for i, a in enumerate(agents):
        pool = others_sum(agents, i)
        fees.append(contract_fee(a.data_amount, a.reported_cost, pool, k,
                                 a.penalty_scale).total)
    return agents, fees


def run_sweep(cfg: ScenarioConfig) -> ResultTable:
    """Misreport sweep for one agent.

    Sweep points share one set of sampled cost pairs (common random numbers),
    so adjacent rows are paired comparisons: the win-frequency ordering across
    misreports is driven by the reports, not by independent resampling noise.
    The stderr column is the per-row marginal binomial error.
    """
    idx = cfg.sweep.agent_index
    n = cfg.constants.num_agents
    k = cfg.constants.noise_scale
    trials = cfg.monte_carlo.trials
    agents, fees = equilibrium_fees(cfg)
    true_cost = cfg.true_costs[idx]
    m_own = agents[idx].data_amount
    pool_share = (3.0 / n) * (float(sum(fees)) - fees[idx])
    base_local = local_loss(m_own, true_cost, k)

    dist = cfg.cost_dist.dist_for(true_cost)
    pairs = dist.sample(substream(cfg.monte_carlo.seed, "sweep-pairs", idx),
                        (trials, 2))
    lo = pairs.min(axis=1)
    hi = pairs.max(axis=1)

    rows = []
    for pct in cfg.sweep.grid():
        reported = true_cost * (1.0 + pct / 100.0)
        p_hat = float(((lo < reported) & (reported < hi)).mean())
        net = p_hat * pool_share
        stderr = pool_share * float(np.sqrt(p_hat * (1.0 - p_hat) / trials))
        rows.append((pct, reported, win_probability(reported, dist), net, stderr))

    meta = base_metadata(cfg)
    meta["trials"] = str(trials)
    meta["agent_index"] = str(idx)
    meta["baseline_local_loss"] = repr(base_local)
    return ResultTable(
        columns=("misreport_pct", "reported_cost", "win_prob",
                 "mean_net_improvement", "stderr"),
        rows=rows, metadata=meta)


def run_penalty_curve(cfg: ScenarioConfig) -> ResultTable:
    """Penalty-plus-data-cost curve over a contribution grid."""
    idx = cfg.penalty_curve.agent_index
    k = cfg.constants.noise_scale
    agents = assign_scales_with_debug(build_agents(cfg), cfg)
    a = agents[idx]
    pool = others_sum(agents, idx)
    m_star = optimal_local_data(a.true_cost, k)
    points = cfg.penalty_curve.grid_points
    top = cfg.penalty_curve.span * m_star
    rows = []
    for j in range(points):
        m = top * j / (points - 1)
        value = free_rider_penalty(m, a.reported_cost, a.penalty_scale, pool, k) \
            + a.true_cost * m
        rows.append((m, value))
    meta = base_metadata(cfg)
    meta["agent_index"] = str(idx)
    meta["local_optimum"] = repr(m_star)
    return ResultTable(columns=("m", "penalty_plus_cost"), rows=rows, metadata=meta)


def run_compare(cfg: ScenarioConfig) -> ResultTable:
    """Per-agent standalone / plain-federation / mechanism mean losses.

    The final row (agent = -1) aggregates column means; its stderr combines
    the per-agent errors as independent."""
    n = cfg.constants.num_agents
    k = cfg.constants.noise_scale
    trials = cfg.monte_carlo.trials
    agents, fees = equilibrium_fees(cfg)
    total_fees = float(sum(fees))
    total_data = float(sum(a.data_amount for a in agents))

    rows = []
    for i, a in enumerate(agents):
        dist = cfg.cost_dist.dist_for(a.true_cost)
        rng = substream(cfg.monte_carlo.seed, "compare", i)
        if cfg.monte_carlo.fixed_pool is None:
            pairs = dist.sample(rng, (trials, 2))
        else:
            pool_draws = dist.sample(rng, cfg.monte_carlo.fixed_pool)
            first = rng.integers(0, cfg.monte_carlo.fixed_pool, size=trials)
            second = rng.integers(0, cfg.monte_carlo.fixed_pool - 1, size=trials)
            second = second + (second >= first)
            pairs = np.stack([pool_draws[first], pool_draws[second]], axis=1)
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        p_hat = float(((lo < a.reported_cost) & (a.reported_cost < hi)).mean())

        share = (3.0 / n) * (total_fees - fees[i])
        loc = local_loss(a.data_amount, a.true_cost, k)
        fed = federated_loss(a.data_amount, total_data - a.data_amount, a.true_cost, k)
        fact_mean = loc - p_hat * share
        stderr = share * float(np.sqrt(p_hat * (1.0 - p_hat) / trials))
        rows.append((float(i), loc, fed, fact_mean, stderr))

    agg = (-1.0,
           float(np.mean([r[1] for r in rows])),
           float(np.mean([r[2] for r in rows])),
           float(np.mean([r[3] for r in rows])),
           float(np.sqrt(np.sum([r[4] ** 2 for r in rows])) / len(rows)))
    rows.append(agg)
    meta = base_metadata(cfg)
    meta["trials"] = str(trials)
    return ResultTable(
        columns=("agent", "local_loss", "federated_loss", "fact_mean_loss",
                 "fact_stderr"),
        rows=rows, metadata=meta)


@dataclass(frozen=True)
class TrainOutputs:
    table: ResultTable
    run: TrainingRun
    outcome: CompetitionOutcome
    ledger: ServerLedger
    breakdowns: tuple[LossBreakdown, ...]
    report: dict


def run_train(cfg: ScenarioConfig, workers: int = 1) -> TrainOutputs:
    """Full pipeline: scale assignment, penalties, fees, federated training,
    competition, settlement.

    A configured free rider contributes m = 0: it still pays its (large)
    penalty and competes with its reported cost, but it has no contract fee
    and trains with aggregation weight 0.
    """
    if cfg.train is None:
        raise ConfigurationError("scenario has no [train] section")
    t = cfg.train
    k = cfg.constants.noise_scale
    n = cfg.constants.num_agents
    seed = cfg.monte_carlo.seed

    agents = assign_scales_with_debug(
        build_agents(cfg, free_rider_index=t.free_rider_index), cfg)
    penalties, penalty_delta = collect_penalties(agents, cfg.constants)
    fees = []
    for i, a in enumerate(agents):
        if a.data_amount == 0.0:
            fees.append(0.0)  # no contribution, no contract to fee
        else:
            fees.append(contract_fee(a.data_amount, a.reported_cost,
                                     others_sum(agents, i), k, a.penalty_scale).total)
    ledger = ServerLedger()
    ledger.add(penalty_delta)
    ledger.add(ServerLedger(fees_collected=float(sum(fees))))

    if t.dimension == 1:
        eigenvalues = (t.lipschitz,)
    else:
        eigenvalues = tuple(np.linspace(t.curvature_min, t.lipschitz, t.dimension))
    task = SyntheticTask(eigenvalues=eigenvalues, optimum=(0.0,) * t.dimension,
                         noise_variance=t.noise_variance)
    start = tuple(t.start_offset for _ in range(t.dimension))
    run = run_pfl_training(agents, task, t.rounds, t.local_steps, t.epochs,
                           t.step_size, master_seed=seed, start_params=start,
                           workers=workers)

    dists = [cfg.cost_dist.dist_for(a.true_cost) for a in agents]
    outcome = run_competition_triples(agents, cfg.constants, seed,
                                      leftover_dists=dists)
    outcome, payout_delta = settle(outcome, fees, cfg.constants)
    ledger.add(payout_delta)

    total_fees = float(sum(fees))
    breakdowns = []
    for i, a in enumerate(agents):
        pool = others_sum(agents, i)
        others_fees = total_fees - fees[i]
        branch = CompetitionBranch.WON if outcome.won[i] else CompetitionBranch.LOST
        if a.data_amount > 0:
            breakdowns.append(fact_loss(a.data_amount, a.true_cost, a.reported_cost,
                                        a.penalty_scale, pool, k, branch,
                                        others_fees, n))
        else:
            base = pfl_loss(a.data_amount, a.true_cost, a.reported_cost,
                            a.penalty_scale, pool, k)
            breakdowns.append(LossBreakdown(
                convergence_term=base.convergence_term, data_cost=base.data_cost,
                free_rider_penalty=base.free_rider_penalty,
                competition_transfer=-outcome.payouts[i]))

    rows = [(float(r), g) for r, g in enumerate(run.grad_sq_norm_history)]
    meta = base_metadata(cfg)
    table = ResultTable(columns=("round", "avg_sq_grad_norm"), rows=rows,
                        metadata=meta)

    gap = task.objective(np.asarray(start))
    bound = None
    if t.local_steps == 1:
        bound = convergence_bound(task, gap, t.rounds, t.step_size,
                                  run.effective_batch)
    report = {
        "scenario_hash": cfg.scenario_hash(),
        "seed": seed,
        "ledger": {"penalties_collected": ledger.penalties_collected,
                   "fees_collected": ledger.fees_collected,
                   "payouts_made": ledger.payouts_made,
                   "feasible": ledger.feasible(),
                   "deficit": outcome.deficit},
        "competition": {"winners": [i for i, w in enumerate(outcome.won) if w],
                        "leftover": list(outcome.leftover),
                        "collected_total": outcome.collected_total,
                        "paid_total": outcome.paid_total},
        "training": {"rounds": t.rounds, "local_steps": t.local_steps,
                     "effective_batch": run.effective_batch,
                     "time_avg_sq_grad_norm":
                         float(np.mean(run.grad_sq_norm_history)),
                     "final_sq_grad_norm": run.grad_sq_norm_history[-1],
                     "bound_h1": bound,
                     "bound_note": None if t.local_steps == 1 else
                         "bound asserted only for local_steps=1; this run is "
                         "reported descriptively"},
        "agents": [{"index": i,
                    "true_cost": a.true_cost,
                    "reported_cost": a.reported_cost,
                    "data_amount": a.data_amount,
                    "penalty_scale": a.penalty_scale,
                    "aggregation_weight": run.weights[i],
                    "penalty": penalties[i],
                    "fee": fees[i],
                    "won": outcome.won[i],
                    "payout": outcome.payouts[i],
                    "loss_breakdown": {
                        "convergence_term": breakdowns[i].convergence_term,
                        "data_cost": breakdowns[i].data_cost,
                        "free_rider_penalty": breakdowns[i].free_rider_penalty,
                        "competition_transfer": breakdowns[i].competition_transfer,
                        "total": breakdowns[i].total}}
                   for i, a in enumerate(agents)],
    }
    return TrainOutputs(table=table, run=run, outcome=outcome, ledger=ledger,
                        breakdowns=tuple(breakdowns), report=report)


def write_report(report: dict, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
