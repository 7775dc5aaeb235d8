"""Tolerance model.

All geometric tolerances are relative to the model scale (the largest
bounding-box extent of the solid).  Residuals of implicit surfaces are
converted to approximate distances by dividing by the gradient norm, so
the same thresholds apply to surfaces of any degree or unit.
"""

import numpy as np

# On-surface tolerance for vertices and edge samples (relative distance).
ON_SURFACE = 1e-7

# Convergence threshold of root finding (relative distance).
ROOT_RESIDUAL = 1e-9

# Two roots closer than this (times model scale) are the same point.
ROOT_DEDUP = 1e-6

# Arc-length slack allowed when testing whether a point lies between the
# bounding vertices of an edge.  Kept a decade below the root dedup so
# that bounds flips localize critical parameters to ~1e-7 of the exact
# value, comfortably inside the 1e-6 detection budget.
EDGE_END = 1e-7

# Jacobian condition number above which a root is considered tangential.
NEAR_SINGULAR_COND = 1e10

# Critical points closer than this in the edit parameter form one batch.
T_TIE = 1e-7

# Angular tolerance (radians) for treating adjacent-face normals as
# collinear, i.e. for classifying an edge as smooth.
G1_ANGLE = 1e-7

# Entities whose extent shrinks below this (times model scale) after a
# topology repair are dropped.
COLLAPSE = 1e-6

# Constraint Jacobian condition number accepted as well-posed.
WELL_POSED_COND = 1e8


def distance_residual(values, grad_norms, model_scale):
    """Convert implicit-surface values to scale-relative distances.

    A floor on the gradient norm keeps the estimate finite at points
    like sphere centers or cone apexes where the gradient vanishes.
    """
    g = np.maximum(np.asarray(grad_norms, dtype=float), 1e-12)
    return np.abs(np.asarray(values, dtype=float)) / (g * model_scale)
