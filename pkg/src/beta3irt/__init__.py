"""Beta item response theory with continuous responses."""
from .core import (
    Ability,
    BetaShape,
    Difficulty,
    Discrimination,
    Family,
    ModelParams,
    Regime,
    ResponseMatrix,
    ability_from_expected_response,
    beta_log_density,
    beta_shape,
    expected_responses,
    icc_2plnd,
    icc_beta3,
    icc_regime,
    icc_slope_at_difficulty,
)
from .mle import MleConfig, fit_mle, holdout_log_loss, log_loss, predict
from .vi import PosteriorSet, ViConfig, fit_vi, posterior_point_estimates

__version__ = "0.1.0"

__all__ = [
    "Ability", "BetaShape", "Difficulty", "Discrimination", "Family", "ModelParams", "Regime",
    "ResponseMatrix", "ability_from_expected_response", "beta_log_density", "beta_shape",
    "expected_responses", "icc_2plnd", "icc_beta3", "icc_regime", "icc_slope_at_difficulty",
    "MleConfig", "fit_mle", "holdout_log_loss", "log_loss", "predict",
    "PosteriorSet", "ViConfig", "fit_vi", "posterior_point_estimates",
]
