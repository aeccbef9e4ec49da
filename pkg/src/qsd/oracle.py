"""Deterministic master-equation integrator used as ground truth.

    d rho/dt = -i[H, rho] - sum_j (L_j^+ L_j rho + rho L_j^+ L_j - 2 L_j rho L_j^+)

Note the rate convention: the sandwich term carries a factor 2 and the
anticommutator none.  A model written in the common convention
``sum_j (L rho L^+ - {L^+L, rho}/2)`` with operators ``C_j`` maps onto this
one through ``L_j = C_j / sqrt(2)``.

Integration uses classical RK4 with a fixed step.  Every call to
:func:`propagate` also integrates at half the step and refuses results that
move by more than ``halving_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DimensionError, NumericalError
from .integrator import ModelSpec
from .linalg import DensityMatrix, Operator

HALVING_TOL = 1e-8


class ConvergenceError(NumericalError):
    """Step-halving self-check failed."""


def lindblad_rhs(model: ModelSpec, rho) -> np.ndarray:
    r = np.asarray(rho, dtype=complex)
    if r.shape != (model.dim, model.dim):
        raise DimensionError(f"rho has shape {r.shape}, model dimension is {model.dim}")
    h = model.hamiltonian.entries
    out = -1j * (h @ r - r @ h)
    for op in model.lindblads:
        l = op.entries
        ld = l.conj().T
        ldl = ld @ l
        out -= ldl @ r + r @ ldl - 2.0 * (l @ r @ ld)
    return out


def default_dt(model: ModelSpec) -> float:
    """Step with ``dt * (||H|| + 2 sum ||L_j||^2) = 0.01``, capped at 0.01."""
    rate = model.hamiltonian.norm() + 2.0 * model.total_channel_norm_sq()
    return 0.01 if rate <= 1.0 else 0.01 / rate


@dataclass(frozen=True, eq=False)
class MasterEvolution:
    model: ModelSpec
    rho0: DensityMatrix
    times: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ArgumentError("sample times must start at 0 and be strictly increasing")
        if self.rho0.dim != self.model.dim:
            raise DimensionError("rho0 dimension does not match the model")
        dt = default_dt(self.model) if self.dt is None else float(self.dt)
        if not (math.isfinite(dt) and dt > 0):
            raise ArgumentError(f"dt must be positive, got {self.dt!r}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "dt", dt)


def _rk4(model: ModelSpec, rho: np.ndarray, times: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty((len(times),) + rho.shape, dtype=complex)
    out[0] = rho
    f = lambda r: lindblad_rhs(model, r)  # noqa: E731
    for i in range(1, len(times)):
        span = times[i] - times[i - 1]
        n = max(1, int(math.ceil(span / dt - 1e-9)))
        h = span / n
        for _ in range(n):
            k1 = f(rho)
            k2 = f(rho + 0.5 * h * k1)
            k3 = f(rho + 0.5 * h * k2)
            k4 = f(rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i] = rho
    return out


def propagate(ev: MasterEvolution, halving_tol: float = HALVING_TOL) -> list[DensityMatrix]:
    """Density matrices at ``ev.times``."""
    rho0 = np.array(ev.rho0.entries)
    coarse = _rk4(ev.model, rho0, ev.times, ev.dt)
    fine = _rk4(ev.model, rho0, ev.times, ev.dt / 2)
    worst = float(np.max(np.abs(coarse - fine)))
    if worst >= halving_tol:
        raise ConvergenceError(
            f"halving dt moved rho by {worst:.3e} (>= {halving_tol:.1e}); reduce dt")
    if not np.all(np.isfinite(fine)):
        raise NumericalError("master-equation integration produced non-finite values")
    return [DensityMatrix(r) for r in fine]


def expectation_of(rho, op: Operator) -> complex:
    r = np.asarray(rho, dtype=complex)
    if r.shape != (op.dim, op.dim):
        raise DimensionError(f"rho has shape {r.shape}, operator dimension is {op.dim}")
    return complex(np.trace(r @ op.entries))
