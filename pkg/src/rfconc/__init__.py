"""Random-feature ridge regression versus kernel ridge regression on nearly orthogonal data."""

from ._backend import BACKEND
from .dataset import (
    DataMatrix,
    OrthogonalityProfile,
    load_csv,
    orthogonality_profile,
    sample_cube,
    sample_sphere,
    select_ell,
    test_point_profile,
    write_csv,
)
from .errors import RFConcError
from .experiment import ExperimentConfig, SweepResult, emit_csv, fit_slope, run_sweep, validate_config
from .hermite import ActivationSpec, HermiteProfile, expand_activation, parse_activation, tail_mass
from .kernel import (
    KernelMatrix,
    RandomFeatureMap,
    cross_kernel_empirical,
    cross_kernel_expected,
    empirical_ck,
    expected_kernel,
    normalized_concentration,
    polynomial_kernel,
)
from .ridge import RidgeFit, fit, gcv, loocv_naive, loocv_shortcut, predict, training_error
from .teacher import (
    TeacherModel,
    generalization_error_mc,
    labels,
    lower_bound_estimate,
    projection_tail_norm,
    sample_teacher,
)

__version__ = "0.1.0"
