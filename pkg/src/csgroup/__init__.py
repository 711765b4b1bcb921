"""Composite separability grouping for large-scale black-box optimization."""

from .baselines import NonPositiveFitness, ddg_decompose, ddg_pairwise_check, dg_pairwise, rdg_like, rdg_set_interact
from .bms import BmsInstance, build_bms, fig1_example, make_basis
from .cc import CcState, SansdeConfig, Subcomponent, cc_optimize, partition_separables, random_grouping, sansde_generation
from .csg import CsgConfig, csg_decompose, golden_section, gsvd, gss_minimize, msvd, nvg, rgd
from .experiment import ExperimentManifest, ManifestError, run_decomposition_suite, run_optimization_suite
from .metrics import AccuracyReport, na, sa
from .problem import BudgetExhausted, FeLedger, GroupingResult, NonFiniteObjective, ObjectiveProblem

__version__ = "0.1.0"
