"""Determinant and trace of the second variation of linear-quadratic control problems.

Three independent routes to the same numbers: the Jacobi system
(``jacobi``), a Galerkin discretisation of the operator (``spectral``) and
closed-form series identities (``identities``).
"""
from .errors import (CommutativityError, DimensionError, LegendreConditionError,
                     NonRegularPointError, NotPositiveDefiniteError, RangeError,
                     SymmetryError)
from .identities import (IdentityCheck, euler_interp, prop2_det, prop2_trace,
                         prop2_trace_commutative)
from .jacobi import (char_fn, det_identity, flow, gram, jacobi_report,
                     lemma1_defect, spectrum_via_roots, trace_identity)
from .model import (CoefficientPath, Problem, build_lti, build_magnetic,
                    build_oscillator, normalize, sampled_problem)
from .spectral import (SpectrumReport, capacity_fit, closed_spectrum_lti,
                       pv_det, pv_trace, spectrum, zeta_bar)

__version__ = "0.1.0"
