"""Renormalization of circle maps with a flat interval and two critical exponents."""
from .diffeo import (
    IDENTITY,
    Diffeo,
    PrecisionPolicy,
    Qs,
    c2_norm_estimate,
    compose,
    deriv,
    distortion,
    exp_family,
    invert,
    zoom,
)
from .maps import MapS, MapX, MapY, eval_map, qs_eval, s_to_x, s_to_y, validate, x_to_s, y_to_s
from .oracle import box_dimension, fibonacci, first_return, gap_decay_check, verify_renorm
from .renorm import RenormTrace, is_renormalizable, iterate, renorm_s, renorm_x, tune_to_fibonacci
from .spectral import build_matrices, classify_geometry, classify_quadrant, decompose, eigen, estimate_Gu, gamma_curve

__version__ = "0.1.0"

__all__ = [
    "IDENTITY",
    "Diffeo",
    "PrecisionPolicy",
    "Qs",
    "c2_norm_estimate",
    "compose",
    "deriv",
    "distortion",
    "exp_family",
    "invert",
    "zoom",
    "MapS",
    "MapX",
    "MapY",
    "eval_map",
    "qs_eval",
    "s_to_x",
    "s_to_y",
    "validate",
    "x_to_s",
    "y_to_s",
    "box_dimension",
    "fibonacci",
    "first_return",
    "gap_decay_check",
    "verify_renorm",
    "RenormTrace",
    "is_renormalizable",
    "iterate",
    "renorm_s",
    "renorm_x",
    "tune_to_fibonacci",
    "build_matrices",
    "classify_geometry",
    "classify_quadrant",
    "decompose",
    "eigen",
    "estimate_Gu",
    "gamma_curve",
]
