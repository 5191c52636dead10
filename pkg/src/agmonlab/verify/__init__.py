"""Checks of the decay, control, Carleman and restriction statements."""

from .carleman import (BracketReport, CarlemanWeight, bracket, bracket_positivity_check,
                       carleman_weight_build, smooth_step)
from .fits import (CONTROL_FAILS, CONTROL_HOLDS, MARGINAL, FitReport, RateReport, annulus_mass,
                   classify, control_fit, fit_rate, forward_agmon_fit)
from .restriction import (LevelCurve, RestrictionReport, bumped_curve, green_balance,
                          level_curve, log_lp_norm, restriction_bound_check)
from .reverse import (ReverseAgmonReport, UpshotReport, default_annulus, reverse_agmon_check,
                      upshot_chain_check, upshot_eps)

__all__ = [
    "BracketReport", "CarlemanWeight", "bracket", "bracket_positivity_check",
    "carleman_weight_build", "smooth_step", "CONTROL_FAILS", "CONTROL_HOLDS", "MARGINAL",
    "FitReport", "RateReport", "annulus_mass", "classify", "control_fit", "fit_rate",
    "forward_agmon_fit", "LevelCurve", "RestrictionReport", "bumped_curve", "green_balance",
    "level_curve", "log_lp_norm", "restriction_bound_check", "ReverseAgmonReport",
    "UpshotReport", "default_annulus", "reverse_agmon_check", "upshot_chain_check", "upshot_eps",
]
