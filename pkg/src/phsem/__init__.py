"""Causal structure learning for linear Gaussian SEMs whose error variances
are equal within the blocks of a known partition."""

__version__ = "0.1.0"

from .errors import (BudgetExceeded, CyclicGraph, DegenerateData, DimensionMismatch,
                     InternalInconsistency, InvalidConditioningSet, SingularRegression,
                     SupportViolation)
from .graph import (Dag, Partition, Pdag, Trek, d_separated, enumerate_treks, relatives,
                    skeleton, topological_order, unshielded_colliders)
from .sem import (SemParams, ci_holds, conditional_variance, conditioning_bounds,
                  equal_variance_holds, implied_covariance, is_member, recover_error_variance,
                  trek_covariance)
from .equivalence import (MeekRule, apply_meek, cpdag, enumerate_pi_class, markov_equivalent,
                          pi_equivalent)
from .learning import (Dataset, FitResult, SampleCov, SearchConfig, bic_score, fit_mle,
                       greedy_search, neighborhood, sample_covariance, shd)
from .simulation import (SimConfig, TrialResult, random_dag, random_sem, run_experiment,
                         sample_data)
