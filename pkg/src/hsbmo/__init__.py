"""Poisson extension for constant-coefficient elliptic systems on the upper
half-space, together with BMO, VMO, Morrey-Campanato and Carleson functionals
evaluated on periodic boundary grids."""

from .approx import *  # noqa: F401,F403
from .calibration import Calibration, load_calibration, save_calibration
from .estimators import CarlesonMeasure, MeanOscillation, PoissonExtension
from .exceptions import CalibrationError, ConfigError, EllipticityError, NumericalFault
from .extension import *  # noqa: F401,F403
from .grid import *  # noqa: F401,F403
from .kernels import *  # noqa: F401,F403
from .seminorms import *  # noqa: F401,F403
from .squarefun import *  # noqa: F401,F403

__version__ = "0.1.0"
