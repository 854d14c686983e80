"""perfpred: optimization and benchmarking under decision-dependent distribution shift.

Deployed models change the data they are evaluated on. This package models
that feedback loop explicitly: distribution maps theta -> D(theta), the
performative risk PR(theta) = E_{z ~ D(theta)} loss(z; theta), convexity
certificates for it, and optimizers that target performative optima versus
the fixed points of retraining.
"""

from .errors import (ConfigurationError, DomainError, NumericalError,
                     UnsupportedScenarioError)
from .maps import (BaseDistribution, BernoulliLinearMap, CountingMap, Domain,
                   DistributionMap, GaussianScaleMap, LocationScaleMap,
                   gaussian_location_map, point_mass_map, sensitivity_bound,
                   wasserstein_upper_bound)
from .losses import (LossConstants, LossSpec, absolute_loss, quadratic_example_loss,
                     regularized_logistic_loss, regularized_loss,
                     squared_distance_loss, squared_loss)
from .risk import (ConvexityCertificate, RiskEstimate, certify_general,
                   certify_location_scale, closed_form_optimum,
                   closed_form_reference, empirical_lambda, estimate_dpr,
                   estimate_pr)
from .dominance import (DominanceReport, check_conditional_mean,
                        check_mixture_dominance, coupled_sample)
from .optim import (GDConfig, GDResult, RunRecord, TracePoint, TwoStageEstimate,
                    dfo, greedy_sgd, lazy_sgd, projected_gd, rrm, two_stage)
from .scenarios import (Scenario, ScenarioConstants, ScenarioReferences,
                        election_linreg_scenario, exponential_scale_scenario,
                        gaussian_scale_scenario, make_scenario,
                        quadratic_scenario, strategic_classification_scenario)
from .bench import (AlgorithmSpec, ExperimentConfig, bootstrap_ci, load_config,
                    run_experiment)

__version__ = "0.1.0"
