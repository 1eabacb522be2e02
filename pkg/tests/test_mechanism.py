"""Server-side mechanism: scale assignment, fees, the sandwich competition,
settlement accounting."""

import itertools
from fractions import Fraction

import pytest

from factmech import (AgentProfile, CompetitionOutcome, ConfigurationError,
                      DomainError, GaussianCost, InvariantViolation,
                      MechanismConstants, ServerLedger, UniformCost, ValidationError,
                      assign_penalty_scales, collect_fees, collect_penalties,
                      ir_gap_analytic, optimal_local_data, penalty_scale_for,
                      run_competition_synthetic, run_competition_triples, settle,
                      win_probability)

CONSTANTS = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=16)
COST = 1.024e-7
M_STAR = optimal_local_data(COST, 2.0)


def equilibrium_roster(n=16, cost=COST, m=None):
    m = M_STAR if m is None else m
    return [AgentProfile(true_cost=cost, reported_cost=cost, data_amount=m)
            for _ in range(n)]


def test_assign_scales_matches_direct_formula():
    assigned = assign_penalty_scales(equilibrium_roster(), CONSTANTS)
    want = penalty_scale_for(COST, 15 * M_STAR, 2.0, 1.0)
    for a in assigned:
        assert a.penalty_scale == pytest.approx(want, rel=1e-12)
    # profiles are new objects; inputs untouched
    assert equilibrium_roster()[0].penalty_scale is None


def test_assign_scales_uses_reported_costs():
    roster = equilibrium_roster()
    roster[3] = AgentProfile(true_cost=COST, reported_cost=2 * COST,
                             data_amount=M_STAR)
    assigned = assign_penalty_scales(roster, CONSTANTS)
    assert assigned[3].penalty_scale != pytest.approx(assigned[0].penalty_scale,
                                                      rel=1e-3)


def test_roster_size_checked():
    with pytest.raises(ConfigurationError):
        assign_penalty_scales(equilibrium_roster(n=5), CONSTANTS)


def test_collect_penalties_at_equilibrium():
    assigned = assign_penalty_scales(equilibrium_roster(), CONSTANTS)
    penalties, delta = collect_penalties(assigned, CONSTANTS)
    # at the optimum the penalty equals the analytic IR slack with alpha = 1
    want = ir_gap_analytic(M_STAR, 15 * M_STAR, 2.0, 1.0)
    for p in penalties:
        assert p == pytest.approx(want, rel=1e-12)
    assert delta.penalties_collected == pytest.approx(16 * want, rel=1e-12)


def test_collect_fees_at_equilibrium():
    assigned = assign_penalty_scales(equilibrium_roster(), CONSTANTS)
    fees, delta = collect_fees(assigned, CONSTANTS)
    want = ir_gap_analytic(M_STAR, 15 * M_STAR, 2.0, 1.0)  # fee == gap when truthful
    for f in fees:
        assert f.total == pytest.approx(want, rel=1e-11)
        assert f.effective == pytest.approx(2 * want, rel=1e-11)
    assert delta.fees_collected == pytest.approx(16 * want, rel=1e-11)


def test_collect_fees_rejects_free_rider():
    roster = equilibrium_roster()
    roster[0] = AgentProfile(true_cost=COST, reported_cost=COST, data_amount=0.0)
    assigned = assign_penalty_scales(roster, CONSTANTS)
    with pytest.raises(DomainError):
        collect_fees(assigned, CONSTANTS)


def test_penalties_and_fees_require_scales():
    with pytest.raises(ConfigurationError):
        collect_penalties(equilibrium_roster(), CONSTANTS)


def test_win_probability_values():
    uni = UniformCost(lower=1.0, upper=3.0)
    assert win_probability(2.0, uni) == pytest.approx(0.5)          # median
    assert win_probability(1.5, uni) == pytest.approx(0.375)        # quartile
    assert win_probability(1.0, uni) == 0.0                         # edge
    assert win_probability(5.0, uni) == 0.0                         # outside
    gau = GaussianCost(mean=1.0, std=0.1)
    assert win_probability(gau.median(), gau) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValidationError):
        win_probability(0.0, uni)


# --- the sandwich competition -------------------------------------------


def triple_constants(n=3):
    return MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=n)


def test_middle_report_wins_every_ordering():
    for perm in itertools.permutations((1.0, 2.0, 3.0)):
        agents = [AgentProfile(true_cost=c, reported_cost=c, data_amount=1.0)
                  for c in perm]
        outcome = run_competition_triples(agents, triple_constants(), seed=123)
        winners = [i for i, w in enumerate(outcome.won) if w]
        assert len(winners) == 1
        assert agents[winners[0]].reported_cost == 2.0


def test_pair_tie_never_elects_the_odd_one_out():
    agents = [AgentProfile(true_cost=c, reported_cost=c, data_amount=1.0)
              for c in (1.0, 2.0, 2.0)]
    for seed in range(200):
        outcome = run_competition_triples(agents, triple_constants(), seed=seed)
        assert not outcome.won[0]
        assert sum(outcome.won) == 1


def test_three_way_tie_is_uniform():
    agents = [AgentProfile(true_cost=1.0, reported_cost=1.0, data_amount=1.0)
              for _ in range(3)]
    counts = [0, 0, 0]
    trials = 2000
    for seed in range(trials):
        outcome = run_competition_triples(agents, triple_constants(), seed=seed)
        counts[outcome.won.index(True)] += 1
    for c in counts:
        assert abs(c / trials - 1 / 3) < 3 * (1 / 3 * 2 / 3 / trials) ** 0.5


def test_partition_covers_roster_exactly_once():
    for n in (3, 6, 10, 16, 17):
        agents = [AgentProfile(true_cost=1.0 + i, reported_cost=1.0 + i,
                               data_amount=1.0) for i in range(n)]
        outcome = run_competition_triples(
            agents, triple_constants(n), seed=7,
            leftover_dists=UniformCost(lower=0.5, upper=float(n + 2)))
        seen = [i for g in outcome.groups for i in g] + list(outcome.leftover)
        assert sorted(seen) == list(range(n))
        assert len(outcome.leftover) == n % 3
        assert len(outcome.leftover_draws) == n % 3
        assert sum(outcome.won) >= n // 3  # one winner per triple, maybe leftover


def test_leftover_win_rule_strict_inside():
    agents = [AgentProfile(true_cost=1.0 + i, reported_cost=1.0 + i,
                           data_amount=1.0) for i in range(4)]
    outcome = run_competition_triples(
        agents, triple_constants(4), seed=11,
        leftover_dists=UniformCost(lower=0.5, upper=6.0))
    (j,) = outcome.leftover
    (pair,) = outcome.leftover_draws
    inside = min(pair) < agents[j].reported_cost < max(pair)
    assert outcome.won[j] == inside


def test_leftover_without_distribution_is_an_error():
    agents = [AgentProfile(true_cost=1.0 + i, reported_cost=1.0 + i,
                           data_amount=1.0) for i in range(4)]
    with pytest.raises(ConfigurationError):
        run_competition_triples(agents, triple_constants(4), seed=11)


def test_competition_needs_three_agents():
    agents = equilibrium_roster(n=2)
    with pytest.raises(ConfigurationError):
        run_competition_triples(agents, triple_constants(2), seed=0)


def test_competition_deterministic_per_seed():
    agents = [AgentProfile(true_cost=1.0 + i, reported_cost=1.0 + i,
                           data_amount=1.0) for i in range(10)]
    dist = UniformCost(lower=0.5, upper=12.0)
    a = run_competition_triples(agents, triple_constants(10), 99, dist)
    b = run_competition_triples(agents, triple_constants(10), 99, dist)
    c = run_competition_triples(agents, triple_constants(10), 100, dist)
    assert a == b
    assert a != c


# --- synthetic (sampled-pair) competition --------------------------------


def test_synthetic_frequency_tracks_formula():
    assigned = assign_penalty_scales(equilibrium_roster(), CONSTANTS)
    dist = GaussianCost(mean=COST, std=0.1 * COST, floor=0.01 * COST)
    result = run_competition_synthetic(assigned, CONSTANTS, dist, trials=20000,
                                       seed=314)
    p = win_probability(COST, dist)
    se = (p * (1 - p) / 20000) ** 0.5
    for freq in result.win_frequency:
        assert abs(freq - p) < 4 * se
    assert result.trials == 20000


def test_synthetic_transfer_is_fee_minus_share():
    assigned = assign_penalty_scales(equilibrium_roster(), CONSTANTS)
    dist = GaussianCost(mean=COST, std=0.1 * COST, floor=0.01 * COST)
    fees = [float(i) for i in range(16)]
    result = run_competition_synthetic(assigned, CONSTANTS, dist, trials=500,
                                       seed=9, fees=fees)
    total = sum(fees)
    for i in range(16):
        share = (3 / 16) * (total - fees[i])
        want = fees[i] - result.win_frequency[i] * share
        assert result.mean_transfer[i] == pytest.approx(want, rel=1e-12)
    assert result.fees == tuple(fees)


def test_synthetic_fixed_pool_of_two_is_all_or_nothing():
    # a two-cost pool means every trial grades against the same distinct pair,
    # so frequencies collapse to exactly 0 or 1
    assigned = assign_penalty_scales(equilibrium_roster(), CONSTANTS)
    dist = UniformCost(lower=0.5 * COST, upper=1.5 * COST)
    result = run_competition_synthetic(assigned, CONSTANTS, dist, trials=1000,
                                       seed=21, fees=[0.0] * 16, fixed_pool=2)
    assert set(result.win_frequency) <= {0.0, 1.0}


def test_synthetic_validation():
    assigned = assign_penalty_scales(equilibrium_roster(), CONSTANTS)
    dist = UniformCost(lower=0.5 * COST, upper=1.5 * COST)
    with pytest.raises(ValidationError):
        run_competition_synthetic(assigned, CONSTANTS, dist, trials=0, seed=1)
    with pytest.raises(ValidationError):
        run_competition_synthetic(assigned, CONSTANTS, dist, trials=10, seed=1,
                                  fixed_pool=1)
    with pytest.raises(ValidationError):
        run_competition_synthetic(assigned, CONSTANTS, dist, trials=10, seed=1,
                                  fees=[1.0])


# --- settlement -----------------------------------------------------------


def test_settle_worked_example():
    outcome = CompetitionOutcome(
        won=(True, False, False, False, True, False),
        groups=((0, 1, 2), (3, 4, 5)), leftover=(), leftover_draws=())
    fees = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    constants = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=6)
    completed, delta = settle(outcome, fees, constants)
    assert completed.payouts == (10.0, 0.0, 0.0, 0.0, 8.0, 0.0)  # (3/6)*(21 - own)
    assert completed.collected_total == 21.0
    assert completed.paid_total == 18.0
    assert completed.deficit == 0.0
    assert delta.payouts_made == 18.0
    assert completed.fees_paid == tuple(fees)


def test_settle_symmetric_triple():
    outcome = CompetitionOutcome(won=(False, True, False), groups=((0, 1, 2),),
                                 leftover=(), leftover_draws=())
    constants = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=3)
    completed, _ = settle(outcome, [0.5, 0.5, 0.5], constants)
    assert completed.paid_total == 1.0   # winner gets the other two fees
    assert completed.collected_total == 1.5


def test_settle_zero_fees():
    outcome = CompetitionOutcome(won=(True, False, False), groups=((0, 1, 2),),
                                 leftover=(), leftover_draws=())
    constants = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=3)
    completed, _ = settle(outcome, [0.0, 0.0, 0.0], constants)
    assert completed.paid_total == 0.0
    assert completed.deficit == 0.0


def test_settle_rejects_impossible_overdraft():
    # two winners inside one triple cannot happen in a real competition; if it
    # does, settlement must refuse rather than mint money
    outcome = CompetitionOutcome(won=(True, True, False), groups=((0, 1, 2),),
                                 leftover=(), leftover_draws=())
    constants = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=3)
    with pytest.raises(InvariantViolation):
        settle(outcome, [1.0, 1.0, 1.0], constants)


def test_settle_records_leftover_deficit():
    outcome = CompetitionOutcome(won=(False, True, False, True),
                                 groups=((0, 1, 2),), leftover=(3,),
                                 leftover_draws=((0.5, 2.0),))
    constants = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=4)
    completed, delta = settle(outcome, [1.0, 1.0, 1.0, 1.0], constants)
    assert completed.paid_total == pytest.approx(4.5)   # 2 winners x (3/4)*3
    assert completed.deficit == pytest.approx(0.5)
    ledger = ServerLedger(fees_collected=4.0)
    ledger.add(delta)
    assert not ledger.feasible()


def test_settle_validates_lengths():
    outcome = CompetitionOutcome(won=(True, False, False), groups=((0, 1, 2),),
                                 leftover=(), leftover_draws=())
    constants = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=4)
    with pytest.raises(ValidationError):
        settle(outcome, [1.0, 1.0, 1.0], constants)


def test_settle_identity_against_exact_rationals():
    """Dyadic fees make every settlement quantity exactly representable, so
    the float pipeline must match Fraction arithmetic bit for bit."""
    n = 12
    fees_frac = [Fraction(7 * i + 3, 64) for i in range(n)]
    fees = [float(f) for f in fees_frac]
    agents = [AgentProfile(true_cost=1.0 + i, reported_cost=1.0 + i,
                           data_amount=1.0) for i in range(n)]
    constants = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=n)
    outcome = run_competition_triples(agents, constants, seed=5)
    completed, _ = settle(outcome, fees, constants)

    collected = sum(fees_frac)
    winners = [i for i, w in enumerate(completed.won) if w]
    paid = sum(Fraction(3, n) * (collected - fees_frac[i]) for i in winners)
    assert completed.paid_total == float(paid)
    assert completed.collected_total == float(collected)
    # the identity: paid = collected - (3/n) * sum of winners' own fees
    assert paid == collected - Fraction(3, n) * sum(fees_frac[i] for i in winners)


def test_ledger_addition():
    ledger = ServerLedger()
    ledger.add(ServerLedger(penalties_collected=1.0))
    ledger.add(ServerLedger(fees_collected=2.0, payouts_made=1.5))
    assert ledger.penalties_collected == 1.0
    assert ledger.fees_collected == 2.0
    assert ledger.payouts_made == 1.5
    assert ledger.feasible()
    ledger.add(ServerLedger(payouts_made=1.0))
    assert not ledger.feasible()
