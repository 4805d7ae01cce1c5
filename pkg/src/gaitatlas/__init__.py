"""Quadrupedal spring-mass gait families via periodic-orbit continuation.

The package builds a planar torso-plus-four-springy-legs model, integrates
its hybrid dynamics with event localization, finds periodic gaits by
Poincare shooting on the flight-apex section, traces one-parameter gait
families with pseudo-arclength continuation, detects symmetry-breaking
bifurcations, and classifies every orbit by footfall pattern and retained
symmetry group.
"""

from .model import (ContactMode, ContinuousState, DegenerateGeometryError,
                    LegIndex, ModelParams, flight_field, joint_position,
                    stance_field, stance_leg_geometry, total_energy)
from .hybrid import (EventRecord, HybridState, IntegratorConfig,
                     StopCondition, Trajectory, apply_transition,
                     integrate_stride, liftoff_guard, touchdown_guard)
from .orbits import (OrbitSolution, SectionState, monodromy, poincare_map,
                     shoot_orbit)
from .symmetry import (GaitLabel, SymmetryElement, apply_to_state, classify,
                       fingerprint, orbit_image_residual)
from .continuation import (Atlas, AtlasConfig, Branch, BifurcationPoint,
                           ContinuationProblem, StepConfig, atlas_sweep,
                           continue_branch, detect_bifurcations,
                           switch_branch)
from .seeds import find_reversible_pronks

__version__ = "0.1.0"
