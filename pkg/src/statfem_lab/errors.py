"""Exception types raised by statfem_lab."""


class StatfemError(Exception):
    """Base class for numerical failures inside the lab."""


class EllipticityError(StatfemError, ValueError):
    """Conductivity is not strictly positive at some quadrature point."""


class SingularSystemError(StatfemError):
    """Stiffness matrix could not be factorized as SPD."""


class OutOfDomainError(StatfemError, ValueError):
    pass


class IncompatibleFieldsError(StatfemError, ValueError):
    pass


class LocationError(StatfemError, ValueError):
    """Sensor locations cannot be resolved against a prior."""


class ConditioningError(StatfemError):
    pass


class QuadratureError(StatfemError):
    """Adaptive quadrature failed to reach its tolerance."""


class ConfigError(ValueError):
    """Invalid experiment configuration. ``problems`` lists (field, message)."""

    def __init__(self, problems):
        self.problems = list(problems)
        msg = "; ".join(f"{k}: {v}" for k, v in self.problems)
        super().__init__(msg)
