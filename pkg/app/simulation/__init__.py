"""Synthetic experiments with known ground truth."""

from app.simulation.binary_experiment import (default_ratios, generate_binary_agent_log,
                                              grid_search_threshold_oracle, run_binary_experiment)
from app.simulation.car_experiment import (accident_risk_model, default_control_laws,
                                           lateness_risk_model, run_car_experiment)

__all__ = [
    'default_ratios', 'generate_binary_agent_log', 'grid_search_threshold_oracle',
    'run_binary_experiment', 'accident_risk_model', 'default_control_laws',
    'lateness_risk_model', 'run_car_experiment',
]
