"""Curriculum-accelerated self-supervised learning over discretized control spaces."""
from ._accel import USE_NUMBA, backend
from .curriculum import Curriculum, build_curriculum, energy, oracle_curriculum
from .quasirandom import SaltelliDesign, SobolStream, saltelli_design, sobol_points
from .sensitivity import SensitivityReport, analyze, analyze_dataset, bootstrap_ci
from .space import ControlDim, ControlSpace, grasping_preset

__version__ = "0.1.0"
