"""ROC construction, binormal fitting and slope estimation."""

from app.roc.roc_curve import (build_empirical_roc, default_bandwidth, empirical_operating_point,
                               estimate_priors, fit_binormal, log_roc_slope, nonparametric_derivatives,
                               operating_point, parametric_derivatives, parametric_roc,
                               roc_slope_nonparametric, roc_slope_parametric)

__all__ = [
    'build_empirical_roc', 'default_bandwidth', 'empirical_operating_point', 'estimate_priors',
    'fit_binormal', 'log_roc_slope', 'nonparametric_derivatives', 'operating_point', 'parametric_derivatives',
    'parametric_roc', 'roc_slope_nonparametric', 'roc_slope_parametric',
]
