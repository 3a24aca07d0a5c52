"""Symplectic tomograms of classical one- and two-particle kinetic states."""
from .errors import (AccuracyError, ArgumentError, InconsistencyError, InversionQualityError,
                     PreconditionError, TomokinError)
from .kernels import BACKEND
from .numerics import Grid1D
from .phasespace import (Free, GaussianSpec, Harmonic, Pair, PairProfile, PhaseSpaceDensity,
                         Polynomial, make_gaussian, stationary_density)
from .radon import (FrameList, LatticeFrames, Tomogram, radon_forward_direct, radon_forward_slice,
                    radon_inverse, reduce_tomogram)
from .liouville import PropagatorConfig, evolve_density
from .tomoprop import TomoPDEConfig, evolve_tomogram
from .fieldfile import FieldFile
from .scenario import Scenario, load, loads
from .runner import run_scenario

__version__ = "0.1.0"
