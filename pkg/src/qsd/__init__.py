"""Collapse-model quantum trajectories: stochastic state diffusion, a master-equation
oracle, and the experiments that tie the two together."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .linalg import (DensityMatrix, Eigensystem, Operator, StateVector, eigendecompose,  # noqa: F401
                     expectation, fidelity_to_eigenspace, outer_product, trace_distance, variance)
from .noise import NoiseStream, WienerIncrement, derive_stream, next_increments  # noqa: F401
from .integrator import (IntegrationConfig, ModelSpec, TrajectoryRecord, collapse_time,  # noqa: F401
                         diffusion_term, drift_term, run_batch, run_trajectory, step)
from .oracle import MasterEvolution, expectation_of, lindblad_rhs, propagate  # noqa: F401
from .models import (FockSpace, LocalizationChain, build_dephasing_qubit,  # noqa: F401
                     build_localization_model, build_photon_number_model, fig1_initial_state,
                     plus_state)
from .experiments import (EnsembleResult, born_test, oracle_comparison, run_ensemble,  # noqa: F401
                          scaling_study)
