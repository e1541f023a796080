"""Probabilistic domain decomposition for linear and semilinear PDEs."""

from .branching import (AssumptionReport, BranchingSpec, ParticleTree, PolynomialFit,
                        check_marked_assumptions, estimate_branching, fit_positive_part,
                        score_tree, simulate_tree)
from .errors import (AssumptionViolation, ConfigurationError, DivergenceError, HorizonExhausted,
                     IncompleteGrid, InvalidArgument, InvalidMeasurement, MissingDatum, PddError,
                     UnsupportedConfiguration)
from .feynman_kac import LinearBvpSpec, PointEstimate, estimate_point, walk_on_spheres
from .geometry import (BoxDomain, FaceKind, InterfaceGrid, Partition, build_interface_grid,
                       classify_point, partition_box)
from .orchestrator import (GlobalSolution, PddConfig, SpeedupReport, StageTimings,
                           interpolate_interface, measure_speedup, run_pdd)
from .pde import (EllipticProblem2D, ParabolicProblem1D, solve_elliptic_2d, solve_parabolic_1d)
from .problems import CvaSpec, KppSpec, ManufacturedElliptic
from .sde import DiffusionCoefficients, RngStream, simulate_path, simulate_paths

__all__ = [name for name in dir() if not name.startswith("_")]
