"""Ricci flow of multiply-warped product metrics over a one-dimensional base."""
from .assumptions import (GridSpec, admissibility_check, build_canonical_example, build_circle_fiber, build_cylinder,
                          build_interior_minimum, build_perturbed_cylinder, validate_main_assumptions)
from .errors import *  # noqa: F401,F403
from .flow import IntegratorConfig, Trajectory, run, step
from .geometry import FiberSpec, FlowState, WarpedProductSpec, curvature_components, riemann_sup_norm

__version__ = "0.1.0"
