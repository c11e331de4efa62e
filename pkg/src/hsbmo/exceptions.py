class EllipticityError(ValueError):
    """Sampled Legendre-Hadamard form is not positive.

    ``xi`` and ``eta`` hold the violating unit pair and ``value`` the form.
    """

    def __init__(self, message, xi=None, eta=None, value=None):
        super().__init__(message)
        self.xi = xi
        self.eta = eta
        self.value = value


class NumericalFault(RuntimeError):
    """A residual or convergence invariant was breached during a build."""


class ConfigError(ValueError):
    """Invalid run configuration."""


class CalibrationError(RuntimeError):
    """Calibration file missing, malformed, or failing its checksum."""
