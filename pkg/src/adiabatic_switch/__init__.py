"""Adiabatic switching with compactly supported (Gevrey-class) schedules.

Modules
-------
schedule     switching functions, derivatives and Gevrey-constant fits
hamiltonian  interpolating families, spectral frames, band tracking
nenciu       superadiabatic expansion terms B_j on a Chebyshev grid
propagator   Schrodinger evolution and adiabatic distances
bounds       explicit coefficient/remainder bounds and the run-time law
appendix     high-precision checks of the supporting inequalities
harness      config-driven sweeps and output files
"""

from .appendix import AppendixRanges, VerificationReport, verify_appendix
from .bounds import (BoundParams, L_bound, TruncationPlan, log_L_bound, optimal_truncation,
                     partial_sum_bound, remainder_bound, tau_threshold)
from .errors import *  # noqa: F401,F403
from .hamiltonian import (HamiltonianFamily, SpectralFrame, interpolating_family,
                          spectral_frame, track_band, two_level_family)
from .harness import (ExperimentConfig, SweepResult, emit_outputs, fit_loglog_slope,
                      run_sweep, runtime_law_check)
from .nenciu import ExpansionSeries, compute_series, contour_map, truncated_projector
from .propagator import Trajectory, adiabatic_distance, evolve
from .schedule import (BumpSchedule, GevreyFit, build_bump_schedule, fit_gevrey_constants,
                       schedule_by_name)

__version__ = "0.1.0"
