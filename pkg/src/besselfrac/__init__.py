"""Simulation and Monte Carlo analysis of multivariate Bessel processes
near the walls of their Weyl chamber."""

__version__ = "0.1.0"

from .model import (ChamberError, Configuration, ModelParams, RootSystem, SingularityError,
                    drift, dunkl_bessel_envelope, edge_distance, in_edge_set,
                    is_in_closed_chamber, is_in_open_chamber, k_prime, kappa, log_weight,
                    origin, type_a, type_b, weight, weight_scaling_exponent)
from .sde import (EnsembleResult, IntegratorConfig, PathSample, Scheme, SimulationError,
                  exact_bessel_cdf, exact_bessel_density, exact_bessel_transition,
                  normalization_constant, scaled_pair, simulate_ensemble, simulate_path)
from .probe import (OccupationRecord, ProbeResult, StartWarning, bridge_corrected_hitting,
                    edge_probability, edge_probability_sweep, fit_exponent,
                    joint_edge_probability, joint_edge_sweep, occupation_sweep,
                    occupation_time, window_hitting_probability, window_hitting_sweep)
from .fractal import (DimensionEstimate, box_count, cantor_intervals, collision_time_set,
                      dimension_experiment, estimate_dimension, estimate_from_counts,
                      paired_difference, sojourn_intervals)
from .stats import ScalingFit, bootstrap_ci, fit_power_law, ks_two_sample, wilson_interval
from .config import ConfigError, Experiment, ExperimentConfig, parse_config
