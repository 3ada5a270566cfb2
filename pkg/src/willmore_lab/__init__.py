"""Minimal surfaces with planar ends, their inversions, and the Willmore index."""
from .errors import NumericalFailure, ValidationFailure, WillmoreLabError
from .geometry import (asymptotic_planes, density_sweep, jacobi_apply, inverted_normal_identity_residual,
                       spiny_test, support_field_check, total_curvature, willmore_energy)
from .rational import RationalFn
from .spectral import (GalerkinBasis, assemble_form_eps, compute_index, equivariant_index,
                       extrapolate_form, mass_matrix, morse_index, second_variation_equal_ends,
                       sign_change_check)
from .surface import (NullCurveData, associate, conjugate, end_span_dimension, flower_data,
                      immersion_eval, orbit_act, read_wsd, validate, write_wsd)

__version__ = "0.1.0"
