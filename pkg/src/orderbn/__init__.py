"""Discrete Bayesian-network structure learning under a fixed node ordering.

The same greedy grow/thin search runs on conditional-independence tests
(cross entropies) or on local log-scores (log-likelihood, AIC, Dirichlet
marginal likelihood); :mod:`orderbn.duality` checks the two agree.
"""

from .core import (BayesNet, CountTable, Cpt, Dataset, NodeOrdering, OrderedDag,
                   VariableSpec, config_from_index, family_config_index,
                   make_specs, num_free_parameters, validate_dag)
from .empirical import (EmpiricalContext, dof_delta, empirical_cce,
                        empirical_joint, log_likelihood, log_likelihood_ratio,
                        marginal_counts, mle_cpt)
from .exact import (JointTable, ancestral_sample, conditional_cross_entropy,
                    delta_kl, joint_from_bayesnet, kl_decomposed, kl_divergence,
                    marginalize, project_to_dag)
from .scoring import (DecisionRule, DirichletPrior, TestOutcome, aic_score,
                      bayes_independence_test, ch_family_log_marginal,
                      deviance_difference, evaluate_rule, log_bayes_factor,
                      log_marginal_likelihood)
from .search import (EmpiricalEvaluator, ExactEvaluator, SearchConfig,
                     exhaustive_parents, grow_parents, learn_structure,
                     recover_from_distribution, thin_parents)
from .special import chi2_sf, log_gamma

__version__ = "0.1.0"
