"""Value objects: constants, profiles, breakdowns, cost distributions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factmech import (AgentProfile, EmpiricalCost, GaussianCost, LossBreakdown,
                      MechanismConstants, UniformCost, ValidationError, others_sum)
from factmech.rng import substream


def test_constants_accept_valid():
    c = MechanismConstants(noise_scale=2.0, ir_margin=1.0, num_agents=16)
    assert c.noise_scale == 2.0
    assert c.num_agents == 16


@pytest.mark.parametrize("kwargs", [
    dict(noise_scale=0.0, ir_margin=1.0, num_agents=16),
    dict(noise_scale=-2.0, ir_margin=1.0, num_agents=16),
    dict(noise_scale=math.inf, ir_margin=1.0, num_agents=16),
    dict(noise_scale=2.0, ir_margin=2.0, num_agents=16),   # boundary excluded
    dict(noise_scale=2.0, ir_margin=-0.1, num_agents=16),
    dict(noise_scale=2.0, ir_margin=1.0, num_agents=1),
    dict(noise_scale=2.0, ir_margin=1.0, num_agents=True),
])
def test_constants_reject_bad(kwargs):
    with pytest.raises(ValidationError):
        MechanismConstants(**kwargs)


def test_ir_margin_zero_allowed():
    MechanismConstants(noise_scale=1.0, ir_margin=0.0, num_agents=2)


def test_profile_truthful_flag():
    a = AgentProfile(true_cost=1.0, reported_cost=1.0, data_amount=5.0)
    b = AgentProfile(true_cost=1.0, reported_cost=1.1, data_amount=5.0)
    assert a.truthful and not b.truthful
    assert a.penalty_scale is None


def test_profile_zero_data_is_fine_negative_is_not():
    AgentProfile(true_cost=1.0, reported_cost=1.0, data_amount=0.0)
    with pytest.raises(ValidationError):
        AgentProfile(true_cost=1.0, reported_cost=1.0, data_amount=-1.0)
    with pytest.raises(ValidationError):
        AgentProfile(true_cost=0.0, reported_cost=1.0, data_amount=1.0)
    with pytest.raises(ValidationError):
        AgentProfile(true_cost=1.0, reported_cost=1.0, data_amount=1.0,
                     penalty_scale=-0.5)


def test_breakdown_total_is_exact_sum():
    b = LossBreakdown(convergence_term=0.1, data_cost=0.2, free_rider_penalty=0.3,
                      competition_transfer=-0.05)
    assert b.total == 0.1 + 0.2 + 0.3 + -0.05  # bit-exact, same op order


@given(st.tuples(*[st.floats(-1e6, 1e6) for _ in range(4)]))
def test_breakdown_total_always_matches_components(parts):
    b = LossBreakdown(*parts)
    assert b.total == parts[0] + parts[1] + parts[2] + parts[3]


def test_breakdown_rejects_nonfinite():
    with pytest.raises(ValidationError):
        LossBreakdown(math.nan, 0.0, 0.0, 0.0)


def test_others_sum():
    roster = [AgentProfile(true_cost=1.0, reported_cost=1.0, data_amount=m)
              for m in (1.0, 2.0, 4.0)]
    assert others_sum(roster, 0) == 6.0
    assert others_sum(roster, 2) == 3.0
    with pytest.raises(ValidationError):
        others_sum(roster, 3)
    with pytest.raises(ValidationError):
        others_sum(roster, -1)


# --- cost distributions -------------------------------------------------


def test_gaussian_floor_default_and_sampling():
    dist = GaussianCost(mean=1.0, std=0.5)
    assert dist.floor == 0.01
    draws = dist.sample(substream(7, "model-test"), 5000)
    assert draws.shape == (5000,)
    assert (draws > dist.floor).all()


def test_gaussian_cdf_is_truncated():
    dist = GaussianCost(mean=1.0, std=1.0, floor=1.0)  # cut at the mean
    assert dist.cdf(0.9) == 0.0
    assert dist.cdf(1.0) == 0.0
    # exactly half the remaining mass lies below the truncated median
    assert dist.cdf(dist.median()) == pytest.approx(0.5, abs=1e-12)
    assert dist.median() > 1.0


def test_gaussian_cdf_matches_sampling():
    dist = GaussianCost(mean=2.0, std=0.4, floor=1.5)
    draws = dist.sample(substream(11, "model-test-cdf"), 40000)
    for x in (1.7, 2.0, 2.5):
        frac = float((draws <= x).mean())
        se = math.sqrt(dist.cdf(x) * (1 - dist.cdf(x)) / 40000)
        assert abs(frac - dist.cdf(x)) < 4 * se + 1e-9


def test_gaussian_degenerate_floor_rejected():
    with pytest.raises(ValidationError):
        GaussianCost(mean=1.0, std=0.01, floor=2.0)  # ~0 mass above floor


@given(st.floats(0.02, 5.0), st.floats(0.021, 6.0))
@settings(max_examples=200)
def test_gaussian_cdf_monotone_in_unit_range(a, b):
    dist = GaussianCost(mean=1.0, std=0.3)
    lo, hi = min(a, b), max(a, b)
    assert 0.0 <= dist.cdf(lo) <= dist.cdf(hi) <= 1.0


def test_uniform_basics():
    dist = UniformCost(lower=0.7, upper=1.3)
    assert dist.cdf(0.7) == 0.0
    assert dist.cdf(1.3) == 1.0
    assert dist.cdf(1.0) == pytest.approx(0.5)
    assert dist.median() == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        UniformCost(lower=0.0, upper=1.0)
    with pytest.raises(ValidationError):
        UniformCost(lower=1.0, upper=1.0)


def test_empirical_sorts_and_steps():
    dist = EmpiricalCost(values=(3.0, 1.0, 2.0, 2.0))
    assert dist.values == (1.0, 2.0, 2.0, 3.0)
    assert dist.cdf(0.5) == 0.0
    assert dist.cdf(1.0) == 0.25     # <= semantics
    assert dist.cdf(2.0) == 0.75
    assert dist.cdf(3.0) == 1.0
    assert dist.median() == 2.0
    draws = dist.sample(substream(3, "model-empirical"), 1000)
    assert set(np.unique(draws)) <= {1.0, 2.0, 3.0}


def test_empirical_rejects_bad_values():
    with pytest.raises(ValidationError):
        EmpiricalCost(values=())
    with pytest.raises(ValidationError):
        EmpiricalCost(values=(1.0, -2.0))
