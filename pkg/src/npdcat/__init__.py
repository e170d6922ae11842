"""Normalised prediction discrepancies for mixed-effect models of repeated
categorical data, with simulation-calibrated tests."""

from .model import (CategorySpace, CovariateVector, IndividualParameters, Link, ModelSpec,
                    Shape, StructuralShape, conditional_probs, linear_predictor)
from .npd import (MarginalCdf, NpdVector, compute_npd, counting_marginal_cdf,
                  estimate_marginal_cdf, sample_pd)
from .rng import SeedSpec
from .simulate import (Dataset, Design, SimulatedDataset, Subject, draw_individual_parameters,
                       simulate_dataset, simulate_replicates)
from .stattests import (InapplicableTestError, KsResult, NullDistribution, StratumPlan,
                        TestDecision, calibrate, calibrate_null, chi_square_stratified,
                        corrected_ks_test, ks_statistic, stratified_npd_test)

__version__ = "0.1.0"
