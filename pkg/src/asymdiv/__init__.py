"""Asymmetric two-dimensional divisor problem in arithmetic progressions: exact counts, main terms, mean squares."""
from .divisor import (
    BudgetError,
    Params,
    SeriesBracket,
    decompositions,
    g_ab,
    g_star,
    tau_point,
    tau_sieve,
)
from .error_term import EvalPoint, delta, main_term, psi_sum_delta, summatory_exact
from .hurwitz import PrecisionConfig, digamma, hurwitz_zeta
from .meansquare import cstar, exponent_fit, integral_delta_sq, meansquare_report, remainder_meansquare
from .voronoi import delta_star

__version__ = "0.1.0"

__all__ = [
    "BudgetError", "Params", "SeriesBracket", "decompositions", "g_ab", "g_star", "tau_point",
    "tau_sieve", "EvalPoint", "delta", "main_term", "psi_sum_delta", "summatory_exact",
    "PrecisionConfig", "digamma", "hurwitz_zeta", "cstar", "exponent_fit", "integral_delta_sq",
    "meansquare_report", "remainder_meansquare", "delta_star",
]
