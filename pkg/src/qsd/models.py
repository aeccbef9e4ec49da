"""Concrete systems: photon counting, a dephasing qubit, and an N-particle pointer."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .integrator import ModelSpec
from .linalg import Operator, StateVector

# single-particle mean collapse time is ~10 time units at separation 1 with
# the default tolerances (see scripts/calibrate_coupling.py)
DEFAULT_COUPLING = 0.75


@dataclass(frozen=True)
class FockSpace:
    """Photon-number space truncated at ``n_max`` quanta."""

    n_max: int

    def __post_init__(self):
        if not (isinstance(self.n_max, (int, np.integer)) and self.n_max >= 1):
            raise ArgumentError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def annihilation(self) -> Operator:
        return Operator(np.diag(np.sqrt(np.arange(1, self.dim, dtype=float)), k=1).astype(complex))

    def creation(self) -> Operator:
        return self.annihilation().dag

    def number(self) -> Operator:
        # a^+ a, written out so the diagonal is exactly 0..n_max
        return Operator.diag(np.arange(self.dim, dtype=float))

    def fock(self, n: int) -> StateVector:
        return StateVector.basis(self.dim, n)


def build_photon_number_model(n_max: int = 9) -> ModelSpec:
    """H = L = a^+ a on the truncated Fock space."""
    space = FockSpace(n_max)
    n = space.number()
    return ModelSpec(n, (n,), ("n",), name="photon_number")


def fig1_initial_state(n_max: int = 9) -> StateVector:
    """(|1> + |3> + |5> + |7> + |9>) / sqrt(5)."""
    if not (isinstance(n_max, (int, np.integer)) and n_max >= 9):
        raise ArgumentError(f"the odd-level superposition needs n_max >= 9, got {n_max!r}")
    amps = np.zeros(n_max + 1, dtype=complex)
    amps[[1, 3, 5, 7, 9]] = 1.0
    return StateVector.normalized(amps)


def build_dephasing_qubit(rate: float = 1.0) -> ModelSpec:
    """H = 0 and one channel sqrt(rate) * diag(0, 1).

    Under the master equation the coherence decays as exp(-rate * t).
    """
    if not (isinstance(rate, (int, float)) and math.isfinite(rate) and rate > 0):
        raise ArgumentError(f"rate must be positive, got {rate!r}")
    return ModelSpec(Operator.diag([0.0, 0.0]), (Operator.diag([0.0, math.sqrt(rate)]),), ("z",),
                     name="dephasing")


def plus_state(dim: int = 2) -> StateVector:
    return StateVector.normalized(np.ones(dim, dtype=complex))


@dataclass(frozen=True)
class LocalizationChain:
    n_particles: int
    coupling: float = DEFAULT_COUPLING
    branch_separation: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.n_particles, (int, np.integer)) and self.n_particles >= 1):
            raise ArgumentError(f"n_particles must be an integer >= 1, got {self.n_particles!r}")
        for name in ("coupling", "branch_separation"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ArgumentError(f"{name} must be positive, got {v!r}")

    @property
    def branch_rate(self) -> float:
        """Master-equation decay rate of the here/there coherence."""
        return self.n_particles * self.coupling * self.branch_separation ** 2


def build_localization_model(chain: LocalizationChain) -> tuple[ModelSpec, StateVector, StateVector]:
    """Pointer of N particles restricted to span{|here>^N, |there>^N}.

    Each particle contributes its own channel sqrt(coupling) * x_k, and x_k
    acts on the two-branch subspace as diag(+s/2, -s/2).  Nothing else scales
    with N: the speed-up comes only from the number of channels.
    """
    half = chain.branch_separation / 2
    x = Operator.diag([math.sqrt(chain.coupling) * half, -math.sqrt(chain.coupling) * half])
    n = int(chain.n_particles)
    model = ModelSpec(Operator.diag([0.0, 0.0]), (x,) * n, tuple(f"x{k}" for k in range(n)),
                      name="localization")
    return model, StateVector.basis(2, 0), StateVector.basis(2, 1)
