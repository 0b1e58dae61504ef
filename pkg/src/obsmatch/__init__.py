"""Matching statistics of observed trajectories of chaotic maps.

Simulates the matching process between independently started observed
orbits, fits its Gumbel block-maxima law to estimate generalized
dimensions of the image measure and the extremal index, and validates the
estimators against closed-form oracles for expanding interval maps and
self-similar measures.
"""

from .analytic import (GenericityReport, IntervalModel, check_genericity,
                       doubling_branches, dq_self_similar, example_model,
                       example_theta_closed_form, hk_projection, p0q_interval,
                       preimages, theta_q_interval)
from .dynamics import (GasketAddress, MapSystem, doubling_map, gasket_address,
                       gasket_embed, gasket_shift, henon_map, iterate,
                       make_system, run_seed, sample_initial, sierpinski_gasket,
                       trajectory, trajectory_rng)
from .evt import (EIEstimate, GumbelParams, SpectrumResult, aggregate_runs,
                  dq_from_gumbel, estimate_ei, fit_gumbel, hq_from_theta,
                  moment_estimate, theta_from_gumbel)
from .matching import (MatchConfig, MatchSeries, block_maxima, block_maxima_of,
                       load_values, match_values, save_values,
                       threshold_for_quantile, u_n_schedule, y_process)
from .observables import (Observable, PiecewiseBranch, catalog, derivative,
                          evaluate, example_branches, piecewise_observable,
                          resolve_observable)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
