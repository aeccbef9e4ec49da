"""Dense complex linear algebra on small Hilbert spaces.

Everything here works in natural units (hbar = 1).  States, operators and
density matrices are immutable wrappers around numpy arrays; all functions
are pure, so instances can be shared freely between trajectory workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DimensionError, HermiticityError, NumericalError

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-10
RHO_HERMITIAN_TOL = 1e-10
RHO_TRACE_TOL = 1e-10
RHO_POSITIVITY_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm complex amplitude vector.

    Use :meth:`normalized` to build one from arbitrary (nonzero) amplitudes;
    the plain constructor insists the input already has unit norm.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.size < 1:
            raise DimensionError(f"state must be a non-empty 1-d array, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ArgumentError("state amplitudes must be finite")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ArgumentError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or norm == 0.0:
            raise ArgumentError("cannot normalize a zero or non-finite vector")
        return cls(amps / norm)

    @classmethod
    def basis(cls, dim: int, index: int) -> "StateVector":
        if not 0 <= index < dim:
            raise ArgumentError(f"basis index {index} outside 0..{dim - 1}")
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def __len__(self) -> int:
        return self.dim

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square complex matrix.

    ``hermitian`` may be passed as a claim; it is always checked against the
    entries and an incorrect claim raises :class:`HermiticityError`.
    """

    entries: np.ndarray
    hermitian: bool | None = None
    diagonal: bool = field(init=False)

    def __post_init__(self):
        m = _frozen(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionError(f"operator must be a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ArgumentError("operator entries must be finite")
        actual = bool(np.max(np.abs(m - m.conj().T)) < HERMITIAN_TOL)
        if self.hermitian and not actual:
            raise HermiticityError("operator flagged Hermitian but A != A^dagger")
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "hermitian", actual)
        object.__setattr__(self, "diagonal", bool(np.count_nonzero(m - np.diag(np.diag(m))) == 0))

    @classmethod
    def diag(cls, values) -> "Operator":
        return cls(np.diag(np.asarray(values, dtype=complex)))

    @classmethod
    def identity(cls, dim: int) -> "Operator":
        return cls(np.eye(dim, dtype=complex))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T)

    def norm(self) -> float:
        """Spectral (largest singular value) norm."""
        return float(np.linalg.norm(self.entries, 2))

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _check_dims(self.dim, other.dim)
            return Operator(self.entries @ other.entries)
        if isinstance(other, StateVector):
            _check_dims(self.dim, other.dim)
            return self.entries @ other.amplitudes
        return self.entries @ np.asarray(other)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Eigensystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    groups: tuple[tuple[int, ...], ...]

    @property
    def group_values(self) -> np.ndarray:
        return np.array([self.eigenvalues[list(g)].mean() for g in self.groups])

    def vector(self, i: int) -> StateVector:
        return StateVector.normalized(self.eigenvectors[:, i])

    def group_of(self, value: float) -> int:
        """Index of the eigenvalue group closest to ``value``."""
        return int(np.argmin(np.abs(self.group_values - value)))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix.

    ``tolerance_scale`` loosens every check by a constant factor, for
    ensemble averages that carry Monte-Carlo rounding.
    """

    entries: np.ndarray
    tolerance_scale: float = 1.0

    def __post_init__(self):
        m = _frozen(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionError(f"density matrix must be square, got shape {m.shape}")
        s = self.tolerance_scale
        herm = np.max(np.abs(m - m.conj().T))
        if not herm <= RHO_HERMITIAN_TOL * s:
            raise NumericalError(f"density matrix not Hermitian (deviation {herm:.3e})")
        tr = np.trace(m)
        if not abs(tr - 1.0) <= RHO_TRACE_TOL * s:
            raise NumericalError(f"density matrix trace {tr} != 1")
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lo < -RHO_POSITIVITY_TOL * s:
            raise NumericalError(f"density matrix not positive (min eigenvalue {lo:.3e})")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionError(f"dimension mismatch: {a} vs {b}")


def expectation(op: Operator, psi: StateVector) -> complex:
    """<psi|op|psi> / <psi|psi>."""
    _check_dims(op.dim, psi.dim)
    v = psi.amplitudes
    return complex(np.vdot(v, op.entries @ v) / np.vdot(v, v).real)


def variance(op: Operator, psi: StateVector) -> float:
    """<op^2> - <op>^2 for Hermitian ``op``.

    Evaluated as ||(op - <op>) psi||^2, which is non-negative by construction
    and exactly zero on eigenvectors.
    """
    if not op.hermitian:
        raise HermiticityError("variance needs a Hermitian operator")
    _check_dims(op.dim, psi.dim)
    v = psi.amplitudes
    m = expectation(op, psi).real
    r = op.entries @ v - m * v
    return float(np.vdot(r, r).real / np.vdot(v, v).real)


def _group(values: np.ndarray) -> tuple[tuple[int, ...], ...]:
    scale = max(float(values[-1] - values[0]), float(np.max(np.abs(values))))
    tol = DEGENERACY_TOL * scale
    groups: list[list[int]] = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[groups[-1][0]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return tuple(tuple(g) for g in groups)


def eigendecompose(op: Operator) -> Eigensystem:
    if not op.hermitian:
        raise HermiticityError("eigendecompose needs a Hermitian operator")
    if op.diagonal:
        # exact: eigenvectors are basis vectors, no rotation inside degenerate blocks
        d = op.entries.diagonal().real
        order = np.argsort(d, kind="stable")
        values = d[order]
        vectors = np.eye(op.dim, dtype=complex)[:, order]
    else:
        try:
            values, vectors = np.linalg.eigh(op.entries)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    values = np.ascontiguousarray(values, dtype=float)
    values.setflags(write=False)
    vectors = _frozen(vectors)
    return Eigensystem(values, vectors, _group(values))


def outer_product(psi: StateVector) -> DensityMatrix:
    v = psi.amplitudes
    return DensityMatrix(np.outer(v, v.conj()))


def fidelity_to_eigenspace(psi: StateVector, es: Eigensystem, group: int) -> float:
    """Squared norm of the projection of ``psi`` onto one eigenvalue group."""
    if not (isinstance(group, (int, np.integer)) and 0 <= group < len(es.groups)):
        raise ArgumentError(f"invalid eigenvalue group {group!r}")
    _check_dims(es.eigenvectors.shape[0], psi.dim)
    cols = es.eigenvectors[:, list(es.groups[group])]
    overlaps = cols.conj().T @ psi.amplitudes
    return float(min(1.0, np.sum(np.abs(overlaps) ** 2)))


def trace_distance(a, b) -> float:
    """Half the sum of singular values of ``a - b``."""
    diff = np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex)
    return float(0.5 * np.linalg.svd(diff, compute_uv=False).sum())


def commutator(a: Operator, b: Operator) -> np.ndarray:
    _check_dims(a.dim, b.dim)
    return a.entries @ b.entries - b.entries @ a.entries
