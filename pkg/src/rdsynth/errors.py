"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid model, grid or run configuration."""


class BlowUpError(ArithmeticError):
    """An explicit Euler integration produced a non-finite state."""

    def __init__(self, message, step=None, node=None, mode=None):
        super().__init__(message)
        self.step = step
        self.node = node
        self.mode = mode


class HypothesisError(RuntimeError):
    """The stability hypothesis cannot be satisfied for some mode."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CapacityError(RuntimeError):
    """A configured size budget (grid nodes, mode count, enumeration) was exceeded."""


class ConvergenceError(RuntimeError):
    """The reference integrator failed its step-halving check."""


class ArtifactError(ValueError):
    """A controller artifact file is corrupted or incompatible."""
