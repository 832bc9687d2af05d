"""Two uncoupled oscillators bouncing elastically off a configuration-space step.

The package simulates the impact flow event by event, constructs the
analytically predicted return maps to the turning-point section (rotations on
complement regions, interval exchanges on the step family) and cross-checks
the two numerically.
"""

from .angles import TWO_PI, circle_dist, wrap
from .flow_sim import (Event, EventKind, ImpactState, batch_return_map,
                       build_frame, next_event, propagate_smooth,
                       return_map_samples, section_state, simulate)
from .iem import (CircleIem, FundamentalIem, ReturnMapParams, build_rotation,
                  build_step_circle_iem, compute_params, degeneracy_check,
                  induce_fundamental, return_map)
from .lo_closed_forms import (edge_table, lo_params, chi2_monotonicity,
                              count_chi2_integer_crossings,
                              near_threshold_table)
from .potentials import (OscillatorData, Potential1D, action_and_frequency,
                         angle_of_state, linear_oscillator, oscillator_data,
                         partial_period, period, quartic, state_of_angle,
                         turning_points, wall_phase)
from .step_system import (LevelSet, RegionClass, RegionTag, StepConfig,
                          classify, energy_momentum_diagram,
                          step_family_interval)
from .diagnostics import (classify_orbit, conjugacy_check,
                          find_special_level_sets, sweep)

__version__ = "0.1.0"
