"""Floquet stability of homogeneous oscillations in reaction-diffusion systems."""

from ._kernels import BACKEND, available_backends
from .asymptotics import (
    DecayFit, PhaseField, ProfileComparison, compare_profile, extract_phase, gaussian,
    measure_decay, predicted_alpha_star,
)
from .errors import (
    BlowUp, ConfigError, DegenerateOrbit, EmptyWindow, FloquetRDError, GridTooCoarse,
    InsufficientPoints, IntegratorFailure, NonConvergence, NonSimpleNeutralMode, OutOfTube,
    PerturbationTooWide, UnderResolved,
)
from .floquet import (
    AdjointSolution, Monodromy, StabilityReport, Sweep, Verdict, adjoint_solution, analyze,
    classify, compute_d0, fit_curvature, floquet_exponents, monodromy, spectrum_sweep,
)
from .kinetics import (
    DiffusionMatrix, ExampleParams, KineticsModel, build_model, make_example_model,
    model_from_function, register_model,
)
from .orbit import PeriodicOrbit, find_orbit
from .simulate import (
    FieldState, Grid, PerturbationSpec, SimConfig, init_state, linearized_run, run, step,
)

__version__ = "0.1.0"
