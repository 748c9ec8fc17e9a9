"""Functional AR(1) estimation and a Monte Carlo verification lab."""

from .hilbert import (
    CoeffVector,
    DegenerateSpectrumError,
    DimensionMismatchError,
    LinearOp,
    SpectralDecomp,
    adjoint,
    apply,
    compose,
    inner_product,
    op_norms,
    psd_pinv_sqrt,
    psd_sqrt,
    sym_eigen,
    tensor_product,
)
from .model import (
    EigenProfile,
    FarModel,
    InfeasibleModelError,
    ProfileError,
    build_rho,
    eigen_profile,
    innovation_covariance,
    make_far_model,
    model_from_spec,
    validate_assumptions,
)
from .simulate import Path, kl_sample, simulate_far
from .estimate import Fit, confidence_interval, fit, kn_rule, predict

__version__ = "0.1.0"
