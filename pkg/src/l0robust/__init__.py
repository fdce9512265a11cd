"""Robust classification of Gaussian mixtures under sparse (l0) attacks.

Truncated inner products, the filtration/truncation classifier, exact and
randomized attacks, closed-form robust-error bounds and a Monte Carlo harness.
"""
from .adversary import (
    AdvAStrategy,
    AttackOutcome,
    adv_a_attack,
    genie_classifier,
    lower_bound_thm2,
    lower_bound_thm3,
    make_adv_a,
    worst_case_misclassified,
)
from .asymptotics import PsiCurve, family_log_block, family_spiked, family_uniform, lambda_c, matched_bounds, psi_d, psi_inf_inverse
from .filtrun import (
    BoundReport,
    FiltrunClassifier,
    build_classifier,
    select_f_diagonal,
    select_f_min_bound,
    upper_bound_cor1,
    upper_bound_thm1,
)
from .gmm_model import GmmProblem, LabeledSample, load_problem, make_problem, restrict, sample
from .harness import ErrorEstimate, SweepRow, mc_error_under_adv, mc_robust_error, sweep, validate_oracles
from .kernels import BACKEND
from .trunc_stats import tmean_k, trunc_inner_product, tsum_k

__version__ = "0.1.0"
