"""Riemannian conjugate-gradient methods with general transports and scaling."""

from .geometry import (
    DomainError,
    Geometry,
    GeometryError,
    ProductArray,
    ProductGeometry,
    ShapeDescriptor,
    ShapeMismatchError,
    SingularityError,
    StepTooLongError,
    inner,
    norm,
    product_combine,
    project_to_tangent,
)
from .linesearch import CertifiedStep, LineSearchConfig, LineSearchError, search_armijo, search_twolfe
from .manifolds import (
    EuclideanGeometry,
    GrassmannGeometry,
    SpdBwGeometry,
    SphereGeometry,
    StiefelGeometry,
)
from .monitor import InvariantMonitor, MonitorReport
from .problems import Problem, generate_instance, lyapunov_problem, rayleigh_problem, svd_problem
from .solver import BetaInputs, SolverConfig, SolverTrace, compute_beta, solve, step
from .transports import ConfigurationError, ScalingPolicy, TransportRule, transport

__version__ = "0.1.0"
