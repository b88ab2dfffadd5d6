"""Slow vectors, stable subspaces and attracting compacta for power-bounded matrices."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .operators import *  # noqa: F401,F403
from .norms import *  # noqa: F401,F403
from .slow import *  # noqa: F401,F403
from .attractor import *  # noqa: F401,F403
from .ergodic import *  # noqa: F401,F403
from .report import AnalysisConfig, AsymptoticReport, asymptotic_report  # noqa: F401
from .scenario import Scenario, build_compactum, build_operator, load_scenario, parse_scenario, peripheral_compactum  # noqa: F401
