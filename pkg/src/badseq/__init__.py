"""Desk-scale constructions of bad subsequence averages along k^d and the primes."""

from .equidist import PsiTable, SRule, empirical_N, exact_N_power
from .family import (BuildConfig, Family, StepParams, build_family, restrict_family,
                     y_distribution)
from .periodic import Dense, PeriodicFunction
from .rearrange import RearrangementPlan, find_good_omega
from .residues import QsetCatalog, ResidueSet, SequenceSpec, admissible_residues, combine_crt
from .spacing import SpacingProfile, gap_cdf, poisson_lemma_check
from .verify import demo_maximal, verify_family, weak_norm

__version__ = "0.1.0"

__all__ = [
    "BuildConfig", "Dense", "Family", "PeriodicFunction", "PsiTable", "QsetCatalog",
    "RearrangementPlan", "ResidueSet", "SRule", "SequenceSpec", "SpacingProfile", "StepParams",
    "admissible_residues", "build_family", "combine_crt", "demo_maximal", "empirical_N",
    "exact_N_power", "find_good_omega", "gap_cdf", "poisson_lemma_check", "restrict_family",
    "verify_family", "weak_norm", "y_distribution",
]
