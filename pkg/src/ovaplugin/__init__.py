"""One-vs-all plug-in classification with local polynomial estimates."""

from .classifier import (
    LabeledSample,
    MixingSpec,
    OneVsAllPlugInClassifier,
    effective_sample_size,
    fit_plug_in,
    theory_bandwidth,
)
from .kernels import KernelSpec, gaussian_kernel, validate_kernel
from .lpreg import LocalPolynomialRegressor, build_local_system, clip_unit, lp_estimate
from .multipoly import MultiIndex, PolyBasis, enumerate_basis, eval_monomial, eval_poly

__version__ = "0.1.0"
