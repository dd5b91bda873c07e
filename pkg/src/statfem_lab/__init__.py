"""Statistical finite elements for the 1D and 2D Poisson problem.

A Gaussian-process forcing is pushed through a P1 finite element solver to
give a Gaussian prior over solutions, optionally conditioned on noisy point
sensors, and compared against exact or finer-mesh references in the
Wasserstein-2 metric.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConditioningError,
    ConfigError,
    EllipticityError,
    IncompatibleFieldsError,
    LocationError,
    OutOfDomainError,
    QuadratureError,
    SingularSystemError,
    StatfemError,
)
from .exact import ExactPrior1D, exact_prior_on_grid, greens_eval  # noqa: E402
from .fem import assemble_load, assemble_mass, assemble_stiffness, assemble_system, solve_fem  # noqa: E402
from .fields import GaussianField, reference_grid  # noqa: E402
from .forcing import ForcingModel, kernel_matrix  # noqa: E402
from .mesh import Mesh, build_interval_mesh, build_mesh, build_unit_square_mesh  # noqa: E402
from .metrics import (  # noqa: E402
    sym_psd_sqrt,
    wasserstein2_empirical_1d,
    wasserstein2_gaussian_fields,
    wasserstein2_univariate_gaussian,
)
from .posterior import SensorSet, condition, generate_sensor_data, pushforward_linear_functional  # noqa: E402
from .prior import StatfemPrior, assemble_forcing_covariance, statfem_prior_on_grid  # noqa: E402
from .rates import RateReport, dyadic_log_ratio, fit_loglog_slope, smooth_lr  # noqa: E402
from .sampling import max_functional, sample_field  # noqa: E402
