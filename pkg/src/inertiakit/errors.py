"""Exception types shared across the package."""


class InertiaKitError(Exception):
    """Base class for all inertiakit errors."""


class ModelError(InertiaKitError):
    """Invalid robot model description (URDF text or builder input)."""


class ModelWarning(UserWarning):
    """Non-fatal issue in a model description (ignored elements, odd inertia)."""


class DimensionError(InertiaKitError):
    """Vector or matrix dimensions do not match the model."""


class ChartOverflowError(InertiaKitError):
    """Log-Cholesky coordinates too large to exponentiate in float64."""


class InconsistentParametersError(InertiaKitError):
    """Inertial parameters lie outside the fully consistent set where one is required."""


class SingularMassMatrixError(InertiaKitError):
    """Joint-space mass matrix is numerically singular (e.g. all-zero inertias)."""


class FilterError(InertiaKitError):
    """Estimator misuse (bad dimensions, empty data, window not full)."""


class TrajectoryError(InertiaKitError):
    """Reference trajectory specification invalid for the model."""


class SimulationDivergence(InertiaKitError):
    """Simulated state exceeded the divergence guard."""

    def __init__(self, message: str, t: float = float("nan")):
        super().__init__(message)
        self.t = t


class ConfigError(InertiaKitError):
    """Experiment configuration file invalid; message carries the field path."""
