"""factmech: desk-scale simulator for a penalized, fee-and-competition
federated-learning mechanism.

Layering (low to high): model (value objects, cost distributions), loss
(scalar loss/penalty/fee formulas), equilibrium (closed-form optima plus
independent numeric oracles), mechanism (server-side orchestration and
accounting), fedsim (synthetic federated training), harness (config, CLI,
scenario pipelines).
"""

__version__ = "0.1.0"

from .equilibrium import (BestResponse, StationarityReport, numeric_argmin_1d,
                          numeric_argmin_2d, optimal_federated_data,
                          optimal_local_data, verify_stationarity)
from .errors import (ConfigurationError, DegeneratePenaltyError, DomainError,
                     FactmechError, InvariantViolation, NoContributorsError,
                     SearchError, SingularityError, ValidationError)
from .fedsim import (AgentSimState, SyntheticTask, TrainingRun, VarianceScaling,
                     agent_update, convergence_bound, make_agent_states,
                     measure_variance_scaling, rounded_batch_size, run_pfl_training)
from .loss import (CompetitionBranch, ContractFee, contract_fee, expected_fact_loss,
                   expected_fact_loss_mixture, fact_loss, federated_loss,
                   free_rider_penalty, ir_gap_analytic, local_loss, penalty_scale_for,
                   pfl_loss)
from .mechanism import (CompetitionOutcome, ServerLedger, SyntheticCompetitionResult,
                        assign_penalty_scales, collect_fees, collect_penalties,
                        run_competition_synthetic, run_competition_triples, settle,
                        win_probability)
from .model import (AgentProfile, CostDistribution, EmpiricalCost, GaussianCost,
                    LossBreakdown, MechanismConstants, UniformCost, others_sum)
from .rng import substream

__all__ = [
    "__version__",
    # model
    "AgentProfile", "CostDistribution", "EmpiricalCost", "GaussianCost",
    "LossBreakdown", "MechanismConstants", "UniformCost", "others_sum",
    # loss
    "CompetitionBranch", "ContractFee", "contract_fee", "expected_fact_loss",
    "expected_fact_loss_mixture", "fact_loss", "federated_loss",
    "free_rider_penalty", "ir_gap_analytic", "local_loss", "penalty_scale_for",
    "pfl_loss",
    # equilibrium
    "BestResponse", "StationarityReport", "numeric_argmin_1d", "numeric_argmin_2d",
    "optimal_federated_data", "optimal_local_data", "verify_stationarity",
    # mechanism
    "CompetitionOutcome", "ServerLedger", "SyntheticCompetitionResult",
    "assign_penalty_scales", "collect_fees", "collect_penalties",
    "run_competition_synthetic", "run_competition_triples", "settle",
    "win_probability",
    # fedsim
    "AgentSimState", "SyntheticTask", "TrainingRun", "VarianceScaling",
    "agent_update", "convergence_bound", "make_agent_states",
    "measure_variance_scaling", "rounded_batch_size", "run_pfl_training",
    # errors
    "ConfigurationError", "DegeneratePenaltyError", "DomainError", "FactmechError",
    "InvariantViolation", "NoContributorsError", "SearchError", "SingularityError",
    "ValidationError",
    # rng
    "substream",
]
