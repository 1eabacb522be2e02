"""The invariant suite behind `factmech verify`.

Every check pits one route against an independent one: closed forms against
derivative-free searches, algebraic identities against their long-route
evaluations, analytic probabilities against Monte Carlo frequencies,
settlement totals against the aggregate identity. Checks report a measured
residual against a stated tolerance so failures are diagnosable, and the
whole suite is deterministic given the scenario seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..equilibrium import (numeric_argmin_1d, numeric_argmin_2d, optimal_federated_data,
                           optimal_local_data, verify_stationarity)
from ..loss import (CompetitionBranch, contract_fee, expected_fact_loss,
                    expected_fact_loss_mixture, fact_loss, free_rider_penalty,
                    ir_gap_analytic, local_loss, penalty_scale_for, pfl_loss)
from ..mechanism import (assign_penalty_scales, run_competition_triples, settle,
                         win_probability, CompetitionOutcome)
from ..model import AgentProfile, GaussianCost, MechanismConstants, UniformCost
from ..rng import substream
from .config import ScenarioConfig
from .scenarios import equilibrium_fees


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str

    def as_dict(self) -> dict:
        # numpy scalars sneak in via the Monte Carlo checks; make them JSON-safe
        return {"name": self.name, "passed": bool(self.passed),
                "residual": float(self.residual), "tolerance": float(self.tolerance),
                "detail": self.detail}


@dataclass(frozen=True)
class VerifyReport:
    passed: bool
    checks: tuple[CheckResult, ...]
    scenario_hash: str
    seed: int

    def as_dict(self) -> dict:
        return {"artifact_version": __version__, "scenario_hash": self.scenario_hash,
                "seed": self.seed, "passed": self.passed,
                "checks": [c.as_dict() for c in self.checks]}


def _draw_params(rng, count: int, alpha_low: float = 0.0):
    """Random (cost, noise_scale, sum_others, ir_margin) tuples over the wide
    verification ranges; sum_others is drawn as a multiple of m*."""
    out = []
    for _ in range(count):
        c = float(np.exp(rng.uniform(np.log(1e-8), np.log(10.0))))
        k = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        m_star = optimal_local_data(c, k)
        sum_mult = float(np.exp(rng.uniform(0.0, np.log(1e5))))
        alpha = float(rng.uniform(alpha_low, 1.9))
        out.append((c, k, m_star, sum_mult * m_star, alpha))
    return out


def check_standalone_optimum_stationary(cfg: ScenarioConfig) -> CheckResult:
    """Zero derivative of the penalized loss at the closed-form optimum,
    truthful reporting, for random parameter draws plus the fixture costs."""
    rng = substream(cfg.monte_carlo.seed, "verify-stationary")
    worst = 0.0
    draws = _draw_params(rng, 50)
    draws += [(c, cfg.constants.noise_scale,
               optimal_local_data(c, cfg.constants.noise_scale),
               (cfg.constants.num_agents - 1)
               * optimal_local_data(c, cfg.constants.noise_scale),
               cfg.constants.ir_margin) for c in sorted(set(cfg.true_costs))]
    for c, k, m_star, pool, alpha in draws:
        lam = penalty_scale_for(c, pool, k, alpha)
        if lam == 0.0:
            continue
        h = max(1e-6 * m_star, 1e-9)
        up = pfl_loss(m_star + h, c, c, lam, pool, k).total
        dn = pfl_loss(m_star - h, c, c, lam, pool, k).total
        scale = pfl_loss(m_star, c, c, lam, pool, k).total
        worst = max(worst, abs((up - dn) / (2.0 * h)) / abs(scale))
    return CheckResult("standalone-optimum-stationary", worst <= 1e-6, worst, 1e-6,
                       f"max |d loss/dm| / loss at m* over {len(draws)} draws")


def check_free_ride_clamp(cfg: ScenarioConfig) -> CheckResult:
    """Federated best response is the standalone optimum minus the others'
    pool, clamped at zero — exactly zero once the pool covers the optimum."""
    rng = substream(cfg.monte_carlo.seed, "verify-clamp")
    worst = 0.0
    for c, k, m_star, pool, _ in _draw_params(rng, 100):
        got = optimal_federated_data(c, k, pool)
        want = max(0.0, m_star - pool)
        worst = max(worst, abs(got - want))
        if pool >= m_star and got != 0.0:
            worst = max(worst, abs(got))
    return CheckResult("free-ride-clamp", worst == 0.0, worst, 0.0,
                       "clamped best response over 100 draws, exact")


def check_pfl_argmin_agreement(cfg: ScenarioConfig) -> CheckResult:
    """Golden-section argmin of the penalized loss vs the closed form,
    200 wide-range draws, 1e-6 relative."""
    rng = substream(cfg.monte_carlo.seed, "verify-argmin-1d")
    worst = 0.0
    for c, k, m_star, pool, alpha in _draw_params(rng, 200):
        lam = penalty_scale_for(c, pool, k, alpha)
        if lam == 0.0:
            continue

        def objective(m, c=c, k=k, lam=lam, pool=pool):
            return pfl_loss(m, c, c, lam, pool, k).total

        res = numeric_argmin_1d(objective, 0.01 * m_star, 3.0 * m_star,
                                tol=1e-8 * m_star)
        worst = max(worst, abs(res.argmin_m - m_star) / m_star)
    return CheckResult("pfl-argmin-matches-closed-form", worst <= 1e-6, worst, 1e-6,
                       "max relative argmin error over 200 draws")


def check_ir_gap_identity(cfg: ScenarioConfig) -> CheckResult:
    """Measured advantage of penalized federation at the optimum vs the
    closed form, 200 draws, 1e-10 relative. The config's debug corruption
    factor scales the assigned penalty and must break this check."""
    rng = substream(cfg.monte_carlo.seed, "verify-ir-gap")
    worst = 0.0
    f = cfg.debug_penalty_scale_factor
    for c, k, m_star, pool, alpha in _draw_params(rng, 200, alpha_low=0.01):
        lam = penalty_scale_for(c, pool, k, alpha) * f
        if lam == 0.0:
            continue
        measured = local_loss(m_star, c, k) - pfl_loss(m_star, c, c, lam, pool, k).total
        analytic = ir_gap_analytic(m_star, pool, k, alpha)
        scale = max(abs(analytic), abs(measured), 1e-300)
        worst = max(worst, abs(measured - analytic) / scale)
    return CheckResult("ir-gap-identity", worst <= 1e-10, worst, 1e-10,
                       "max relative gap mismatch over 200 draws")


def check_penalty_nonnegative(cfg: ScenarioConfig) -> CheckResult:
    rng = substream(cfg.monte_carlo.seed, "verify-penalty-sign")
    worst = 0.0
    for c, k, m_star, pool, alpha in _draw_params(rng, 300):
        lam = penalty_scale_for(c, pool, k, alpha)
        if lam == 0.0:
            continue
        m = float(rng.uniform(0.0, 3.0 * m_star))
        reported = c * float(rng.uniform(0.5, 1.5))
        worst = min(worst, free_rider_penalty(m, reported, lam, pool, k))
    return CheckResult("penalty-nonnegative", worst >= 0.0, -worst, 0.0,
                       "most negative penalty over 300 draws (expected none)")


def check_fee_equals_gap(cfg: ScenarioConfig) -> CheckResult:
    """At the truthful optimum the contract fee is exactly the closed-form
    participation advantage."""
    rng = substream(cfg.monte_carlo.seed, "verify-fee-gap")
    worst = 0.0
    for c, k, m_star, pool, alpha in _draw_params(rng, 200, alpha_low=0.01):
        lam = penalty_scale_for(c, pool, k, alpha)
        if lam == 0.0:
            continue
        fee = contract_fee(m_star, c, pool, k, lam).total
        gap = ir_gap_analytic(m_star, pool, k, alpha)
        worst = max(worst, abs(fee - gap) / max(abs(gap), 1e-300))
    return CheckResult("fee-equals-gap-at-optimum", worst <= 1e-11, worst, 1e-11,
                       "max relative fee/gap mismatch over 200 draws")


def check_lost_branch_telescopes(cfg: ScenarioConfig) -> CheckResult:
    """Losing the competition leaves exactly the standalone loss at the true
    cost — for any contribution and any report."""
    rng = substream(cfg.monte_carlo.seed, "verify-telescope")
    worst = 0.0
    for c, k, m_star, pool, alpha in _draw_params(rng, 200):
        lam = penalty_scale_for(c, pool, k, alpha)
        if lam == 0.0:
            continue
        m = m_star * float(rng.uniform(0.8, 1.2))
        reported = c * float(rng.uniform(0.7, 1.3))
        got = fact_loss(m, c, reported, lam, pool, k, CompetitionBranch.LOST,
                        float(rng.uniform(0.0, 10.0)), cfg.constants.num_agents).total
        want = local_loss(m, c, k)
        worst = max(worst, abs(got - want) / abs(want))
    return CheckResult("lost-branch-telescopes-to-local", worst <= 1e-12, worst, 1e-12,
                       "max relative mismatch over 200 draws")


def check_won_branch_better(cfg: ScenarioConfig) -> CheckResult:
    rng = substream(cfg.monte_carlo.seed, "verify-won")
    worst = float("inf")
    n = cfg.constants.num_agents
    for c, k, m_star, pool, alpha in _draw_params(rng, 100):
        lam = penalty_scale_for(c, pool, k, alpha)
        if lam == 0.0:
            continue
        m = m_star * float(rng.uniform(0.8, 1.2))
        others = float(rng.uniform(1e-6, 10.0))
        lost = fact_loss(m, c, c, lam, pool, k, CompetitionBranch.LOST, others, n).total
        won = fact_loss(m, c, c, lam, pool, k, CompetitionBranch.WON, others, n).total
        worst = min(worst, lost - won)
    return CheckResult("won-branch-strictly-better", worst > 0.0, worst, 0.0,
                       "min (lost - won) over 100 draws with positive pool")


def check_expected_loss_simplification(cfg: ScenarioConfig) -> CheckResult:
    """Branch-probability mixture equals the simplified closed form — the
    penalty and fee cancel — over 1000 draws, 1e-12 relative."""
    rng = substream(cfg.monte_carlo.seed, "verify-simplify")
    worst = 0.0
    n = cfg.constants.num_agents
    for c, k, m_star, pool, alpha in _draw_params(rng, 1000):
        lam = penalty_scale_for(c, pool, k, alpha)
        if lam == 0.0:
            continue
        m = m_star * float(rng.uniform(0.8, 1.2))
        reported = c * float(rng.uniform(0.7, 1.3))
        p = float(rng.uniform(0.0, 0.5))
        others = float(rng.uniform(0.0, 10.0))
        long_route = expected_fact_loss_mixture(m, c, reported, lam, pool, k, p,
                                                others, n)
        short_route = expected_fact_loss(m, c, reported, lam, pool, k, p, others, n)
        worst = max(worst, abs(long_route - short_route) / abs(short_route))
    return CheckResult("expected-loss-simplification", worst <= 1e-12, worst, 1e-12,
                       "max relative route mismatch over 1000 draws")


def _joint_argmin_objective(cfg: ScenarioConfig, dist):
    """Unilateral-deviation expected loss surface for the studied agent:
    own penalty scale reassigned from the deviated report, everyone else's
    fees frozen at the truthful equilibrium."""
    idx = cfg.sweep.agent_index
    agents, fees = equilibrium_fees(cfg)
    k = cfg.constants.noise_scale
    n = cfg.constants.num_agents
    a = agents[idx]
    true_cost = a.true_cost
    pool_actual = sum(x.data_amount for j, x in enumerate(agents) if j != idx)
    pool_expected = sum(optimal_local_data(x.reported_cost, k)
                        for j, x in enumerate(agents) if j != idx)
    others_fees = float(sum(fees)) - fees[idx]

    def objective(m: float, c: float) -> float:
        lam = penalty_scale_for(c, pool_expected, k, cfg.constants.ir_margin)
        return expected_fact_loss_mixture(m, true_cost, c, lam, pool_actual, k,
                                          win_probability(c, dist), others_fees, n)

    return objective


def check_truthful_joint_argmin(cfg: ScenarioConfig) -> CheckResult:
    """2-D oracle argmin of the expected loss lands at (m*, true cost) within
    the final grid resolution, for Gaussian and uniform graders whose median
    is the true cost."""
    idx = cfg.sweep.agent_index
    true_cost = cfg.true_costs[idx]
    k = cfg.constants.noise_scale
    m_star = optimal_local_data(true_cost, k)
    dists = [GaussianCost(mean=true_cost, std=0.1 * true_cost,
                          floor=0.01 * true_cost),
             UniformCost(lower=0.7 * true_cost, upper=1.3 * true_cost)]
    worst = 0.0
    detail = []
    for dist in dists:
        objective = _joint_argmin_objective(cfg, dist)
        res = numeric_argmin_2d(objective, (0.5 * m_star, 1.5 * m_star),
                                (0.5 * true_cost, 1.5 * true_cost))
        err_m = abs(res.argmin_m - m_star) / res.resolution_m
        err_c = abs(res.argmin_c - dist.median()) / res.resolution_c
        worst = max(worst, err_m, err_c)
        detail.append(f"{type(dist).__name__}: {err_m:.2f}/{err_c:.2f} cells")
    return CheckResult("truthful-report-joint-argmin", worst <= 1.0, worst, 1.0,
                       "max argmin offset in final-resolution cells — "
                       + "; ".join(detail))


def check_toward_median_improves(cfg: ScenarioConfig) -> CheckResult:
    """Away from the median, shifting the report toward it lowers expected
    loss; the finite-difference sign must match sign(1/2 - F(c))."""
    idx = cfg.sweep.agent_index
    true_cost = cfg.true_costs[idx]
    dist = cfg.cost_dist.dist_for(true_cost)
    objective = _joint_argmin_objective(cfg, dist)
    m_star = optimal_local_data(true_cost, cfg.constants.noise_scale)
    bad = 0
    tested = 0
    for frac in (0.75, 0.85, 0.95, 1.05, 1.15, 1.25):
        c = frac * true_cost
        h = 1e-4 * true_cost
        slope = (objective(m_star, c + h) - objective(m_star, c - h)) / (2.0 * h)
        want = -np.sign(0.5 - dist.cdf(c))  # loss falls toward the median
        # a step-CDF plateau gives slope 0; only the strictly wrong direction fails
        if want != 0 and np.sign(slope) == -want:
            bad += 1
        tested += 1
    return CheckResult("toward-median-improves", bad == 0, float(bad), 0.0,
                       f"wrong-direction finite differences at {tested} off-median "
                       f"reports")


def check_win_probability_mc(cfg: ScenarioConfig) -> CheckResult:
    """Analytic sandwich probability vs Monte Carlo frequency, 10 pairs,
    3 binomial standard errors."""
    trials = cfg.monte_carlo.trials
    pairs = []
    for i, q in enumerate((0.35, 0.5, 0.65, 0.9, 1.2)):
        pairs.append((GaussianCost(mean=1.0, std=0.25, floor=0.01), q, i))
    for i, q in enumerate((0.25, 0.5, 0.55, 0.75, 0.95)):
        pairs.append((UniformCost(lower=0.0 + 1e-9, upper=1.0), q, 5 + i))
    worst = 0.0
    for dist, c, tag in pairs:
        rng = substream(cfg.monte_carlo.seed, "verify-winprob", tag)
        draws = dist.sample(rng, (trials, 2))
        lo = draws.min(axis=1)
        hi = draws.max(axis=1)
        p_hat = float(((lo < c) & (c < hi)).mean())
        p = win_probability(c, dist)
        se = max(np.sqrt(p * (1.0 - p) / trials), 1.0 / trials)
        worst = max(worst, abs(p_hat - p) / (3.0 * se))
    return CheckResult("win-probability-formula-mc", worst <= 1.0, worst, 1.0,
                       "max |frequency - formula| in units of 3 standard errors, "
                       "10 (distribution, cost) pairs")


def check_sandwich_median_wins(cfg: ScenarioConfig) -> CheckResult:
    """All 6 orderings of three distinct reported costs: the middle one wins."""
    constants = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=3)
    costs = (1.0, 2.0, 3.0)
    bad = 0
    from itertools import permutations
    for perm in permutations(range(3)):
        agents = [AgentProfile(true_cost=costs[p], reported_cost=costs[p],
                               data_amount=1.0) for p in perm]
        outcome = run_competition_triples(agents, constants, seed=cfg.monte_carlo.seed)
        winner = outcome.won.index(True)
        if agents[winner].reported_cost != 2.0 or sum(outcome.won) != 1:
            bad += 1
    return CheckResult("sandwich-median-wins", bad == 0, float(bad), 0.0,
                       "orderings where a non-middle cost won (of 6)")


def check_budget_identity(cfg: ScenarioConfig) -> CheckResult:
    """Settlement totals on random complete-triple rosters: the payout total
    equals collected - (3/n) * winners' own fees, and never exceeds collected."""
    rng = substream(cfg.monte_carlo.seed, "verify-budget")
    worst = 0.0
    for _ in range(100):
        n = 3 * int(rng.integers(1, 11))
        fees = [float(f) for f in rng.uniform(0.0, 2.0, size=n)]
        won = [False] * n
        for g in range(n // 3):
            won[3 * g + int(rng.integers(3))] = True
        outcome = CompetitionOutcome(
            won=tuple(won),
            groups=tuple((3 * g, 3 * g + 1, 3 * g + 2) for g in range(n // 3)),
            leftover=(), leftover_draws=())
        constants = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=n)
        completed, _ = settle(outcome, fees, constants)
        collected = completed.collected_total
        winners_own = sum(fees[i] for i in range(n) if won[i])
        # one winner per triple => |W| = n/3, and the payout total telescopes:
        expected = collected - (3.0 / n) * winners_own
        worst = max(worst, abs(completed.paid_total - expected)
                    / max(1.0, abs(collected)))
        if completed.paid_total > collected * (1 + 1e-12) + 1e-12:
            worst = max(worst, completed.paid_total - collected)
    return CheckResult("budget-identity", worst <= 1e-12, worst, 1e-12,
                       "max settlement identity residual over 100 rosters")


def check_equilibrium_stationarity(cfg: ScenarioConfig) -> CheckResult:
    """Both partials of the expected-loss surface vanish at the truthful
    optimum under a median-at-true-cost grader."""
    idx = cfg.sweep.agent_index
    true_cost = cfg.true_costs[idx]
    dist = cfg.cost_dist.dist_for(true_cost)
    objective = _joint_argmin_objective(cfg, dist)
    m_star = optimal_local_data(true_cost, cfg.constants.noise_scale)
    report = verify_stationarity(lambda m, c: objective(m, c),
                                 (m_star, dist.median()))
    worst = max(abs(g) for g in report.partials) / report.loss_scale
    return CheckResult("equilibrium-stationarity", report.passed, worst, 1e-5,
                       "max |partial| / loss scale at the truthful optimum")


ALL_CHECKS = (
    check_standalone_optimum_stationary,
    check_free_ride_clamp,
    check_pfl_argmin_agreement,
    check_ir_gap_identity,
    check_penalty_nonnegative,
    check_fee_equals_gap,
    check_lost_branch_telescopes,
    check_won_branch_better,
    check_expected_loss_simplification,
    check_truthful_joint_argmin,
    check_toward_median_improves,
    check_win_probability_mc,
    check_sandwich_median_wins,
    check_budget_identity,
    check_equilibrium_stationarity,
)


def run_all(cfg: ScenarioConfig) -> VerifyReport:
    results = tuple(check(cfg) for check in ALL_CHECKS)
    return VerifyReport(passed=all(r.passed for r in results), checks=results,
                        scenario_hash=cfg.scenario_hash(), seed=cfg.monte_carlo.seed)
