"""Dual billiards about convex curves as half-cylinder twist maps."""
from .curve import (Curve, Piece, RadiusProfile, build_support, builtin_curves, closure_defect,
                    ellipse_curve, eval_rho, load_curve, save_curve)
from .dualmap import DualBilliardMap, EnvelopePoint, LiftedPoint
from .errors import DualBilliardsError
from .twistcore import (CircleGraph, Configuration, angenent_solve, area_function, periodic_orbit,
                        rotation_number)

__all__ = [
    "Curve", "Piece", "RadiusProfile", "build_support", "builtin_curves", "closure_defect",
    "ellipse_curve", "eval_rho", "load_curve", "save_curve",
    "DualBilliardMap", "EnvelopePoint", "LiftedPoint", "DualBilliardsError",
    "CircleGraph", "Configuration", "angenent_solve", "area_function", "periodic_orbit",
    "rotation_number",
]
__version__ = "0.1.0"
