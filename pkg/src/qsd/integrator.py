"""Euler-Maruyama integration of the collapse SDE

    d psi = -i H psi dt
            + sum_j (2 <L_j^+> L_j - L_j^+ L_j - <L_j^+><L_j>) psi dt
            + g * sum_j (L_j - <L_j>) psi dxi_j

with complex Wiener increments ``E[dxi_j conj(dxi_k)] = delta_jk dt`` and
explicit renormalization after each step.

The noise gain ``g`` defaults to sqrt(2).  With the doubled drift written
above, that is the only gain for which the continuous equation preserves the
norm, the outcome probabilities are martingales (Born rule) and the ensemble
average obeys the master equation in :mod:`qsd.oracle`
(``-(L^+L rho + rho L^+L - 2 L rho L^+)``).  ``g = 1`` is kept available for
comparison studies.

The engine works on a batch of trajectories, shape ``(batch, dim)``.  It only
uses elementwise operations and reductions along the last axis, so each
row's arithmetic is independent of which other rows share the batch; that is
what makes ensemble results bitwise independent of chunking and worker
count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ChannelCountError, ConfigError, DimensionError, NonFiniteError
from .linalg import Eigensystem, Operator, StateVector, eigendecompose
from .noise import NoiseStream, WienerIncrement

NOISE_GAIN = math.sqrt(2.0)
SUSTAIN_STRIDES = 10
NOISE_BLOCK = 1024
DT_NORM_BOUND = 0.1


@dataclass(frozen=True, eq=False)
class ModelSpec:
    hamiltonian: Operator
    lindblads: tuple[Operator, ...]
    labels: tuple[str, ...] = ()
    name: str = "model"

    def __post_init__(self):
        lindblads = tuple(self.lindblads)
        if not lindblads:
            raise ArgumentError("model needs at least one Lindblad channel (use a zero operator for none)")
        if not self.hamiltonian.hermitian:
            raise ArgumentError("Hamiltonian must be Hermitian")
        dim = self.hamiltonian.dim
        for op in lindblads:
            if op.dim != dim:
                raise DimensionError(f"Lindblad dimension {op.dim} != Hamiltonian dimension {dim}")
        labels = tuple(self.labels) or tuple(f"L{j}" for j in range(len(lindblads)))
        if len(labels) != len(lindblads):
            raise ArgumentError("one label per Lindblad channel required")
        if len(set(labels)) != len(labels):
            raise ArgumentError(f"channel labels must be unique: {labels}")
        object.__setattr__(self, "lindblads", lindblads)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def channel_count(self) -> int:
        return len(self.lindblads)

    def max_channel_norm_sq(self) -> float:
        return max(op.norm() ** 2 for op in self.lindblads)

    def total_channel_norm_sq(self) -> float:
        return sum(op.norm() ** 2 for op in self.lindblads)


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float
    t_max: float
    renormalize_every: int = 1
    convergence_var_tol: float = 1e-6
    convergence_fid_tol: float = 1e-6
    record_stride: int = 50
    stop_on_collapse: bool = True
    keep_snapshots: bool = False
    noise_gain: float = NOISE_GAIN

    def __post_init__(self):
        problems = []
        for name in ("dt", "t_max", "convergence_var_tol", "convergence_fid_tol", "noise_gain"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                problems.append(f"{name} must be a positive finite number (got {v!r})")
        for name in ("renormalize_every", "record_stride"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 1):
                problems.append(f"{name} must be a positive integer (got {v!r})")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil(self.t_max / self.dt - 1e-9)))

    def check_model(self, model: ModelSpec) -> None:
        bound = self.dt * model.max_channel_norm_sq()
        if not bound < DT_NORM_BOUND:
            raise ConfigError(
                f"dt * max_j ||L_j||^2 = {bound:.4g} must be < {DT_NORM_BOUND}; reduce dt")


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    times: np.ndarray
    expectations: np.ndarray  # (n_records, channels), complex
    variances: np.ndarray  # (n_records, hermitian channels)
    fidelities: np.ndarray  # best eigen-group fidelity of the verdict channel
    labels: tuple[str, ...]
    hermitian_channels: tuple[int, ...]
    final_state: StateVector
    steps_taken: int
    collapsed_to: int | None = None
    collapsed_value: float | None = None
    collapse_time: float | None = None
    snapshots: np.ndarray | None = None
    trajectory_index: int | None = None

    @property
    def decided(self) -> bool:
        return self.collapsed_to is not None

    @property
    def verdict(self) -> str:
        if self.collapsed_to is None:
            return "undecided"
        return f"collapsed_to:{self.collapsed_value:g}"


@dataclass(eq=False)
class _Engine:
    """Precomputed operator data for batched stepping of one model."""

    model: ModelSpec
    gain: float = NOISE_GAIN
    diagonal: bool = field(init=False)

    def __post_init__(self):
        m = self.model
        self.diagonal = m.hamiltonian.diagonal and all(op.diagonal for op in m.lindblads)
        self.h = np.ascontiguousarray(m.hamiltonian.entries)
        self.ls = [np.ascontiguousarray(op.entries) for op in m.lindblads]
        self.ldl = [op.entries.conj().T @ op.entries for op in m.lindblads]
        if self.diagonal:
            self.hd = self.h.diagonal().copy()
            self.ld = np.array([l.diagonal() for l in self.ls])
            self.ldl_d = np.array([d.diagonal() for d in self.ldl])
        self.hermitian = tuple(j for j, op in enumerate(m.lindblads) if op.hermitian)
        self.verdict_channel = None
        self.eigen: Eigensystem | None = None
        for j in self.hermitian:
            es = eigendecompose(m.lindblads[j])
            if len(es.groups) > 1:
                self.verdict_channel, self.eigen = j, es
                break
        if self.eigen is not None:
            self.eig_vh = np.ascontiguousarray(self.eigen.eigenvectors.conj().T)
            self.group_index = [list(g) for g in self.eigen.groups]
            self.group_values = self.eigen.group_values

    @staticmethod
    def _apply(a: np.ndarray, psi: np.ndarray) -> np.ndarray:
        # row-wise matrix-vector product without BLAS, see module docstring
        return (psi[:, None, :] * a[None, :, :]).sum(axis=-1)

    def means(self, psi: np.ndarray):
        """Return (<L_j> of shape (B, J), L_j psi list or None, |psi|^2)."""
        w = psi.real ** 2 + psi.imag ** 2
        n2 = w.sum(axis=-1)
        if self.diagonal:
            m = (w[:, None, :] * self.ld[None, :, :]).sum(axis=-1) / n2[:, None]
            return m, None, n2
        lpsi = [self._apply(l, psi) for l in self.ls]
        m = np.stack([(psi.conj() * lp).sum(axis=-1) for lp in lpsi], axis=1) / n2[:, None]
        return m, lpsi, n2

    def drift(self, psi: np.ndarray) -> np.ndarray:
        m, lpsi, _ = self.means(psi)
        if self.diagonal:
            out = -1j * self.hd * psi
            for j in range(len(self.ls)):
                mj = m[:, j, None]
                out = out + (2 * mj.conj() * self.ld[j] - self.ldl_d[j] - (mj.conj() * mj)) * psi
            return out
        out = -1j * self._apply(self.h, psi)
        for j in range(len(self.ls)):
            mj = m[:, j, None]
            out = out + 2 * mj.conj() * lpsi[j] - self._apply(self.ldl[j], psi) - (mj.conj() * mj) * psi
        return out

    def diffusion(self, psi: np.ndarray, dxi: np.ndarray) -> np.ndarray:
        m, lpsi, _ = self.means(psi)
        out = np.zeros_like(psi)
        for j in range(len(self.ls)):
            lp = self.ld[j] * psi if self.diagonal else lpsi[j]
            out = out + self.gain * dxi[:, j, None] * (lp - m[:, j, None] * psi)
        return out

    def advance(self, psi: np.ndarray, dxi: np.ndarray, dt: float) -> np.ndarray:
        """One unnormalized Euler-Maruyama step for every row of ``psi``."""
        m, lpsi, _ = self.means(psi)
        g = self.gain
        if self.diagonal:
            # psi' = psi * f, f = 1 + dt*(-iH - sum L^+L) + sum_j c_j L_j - s
            f = 1.0 - dt * (1j * self.hd + self.ldl_d.sum(axis=0))
            s = 0.0
            for j in range(len(self.ls)):
                mj = m[:, j]
                gx = g * dxi[:, j]
                f = f + (gx + 2 * dt * mj.conj())[:, None] * self.ld[j]
                s = s + mj * gx + dt * (mj.conj() * mj)
            return psi * (f - s[:, None])
        out = psi - 1j * dt * self._apply(self.h, psi)
        for j in range(len(self.ls)):
            mj = m[:, j, None]
            gx = g * dxi[:, j, None]
            out = (out + (gx + 2 * dt * mj.conj()) * lpsi[j] - dt * self._apply(self.ldl[j], psi)
                   - (mj * gx + dt * (mj.conj() * mj)) * psi)
        return out

    def observe(self, psi: np.ndarray):
        """Expectations, Hermitian-channel variances and verdict metrics.

        Returns ``(expectations (B,J), variances (B,Jh), best_group (B,),
        best_fidelity (B,))``; groups are -1 when no verdict channel exists.
        """
        m, lpsi, n2 = self.means(psi)
        var = np.empty((psi.shape[0], len(self.hermitian)))
        for k, j in enumerate(self.hermitian):
            lp = self.ld[j] * psi if self.diagonal else lpsi[j]
            r = lp - m[:, j, None].real * psi
            var[:, k] = (r.real ** 2 + r.imag ** 2).sum(axis=-1) / n2
        if self.eigen is None:
            return m, var, np.full(psi.shape[0], -1), np.zeros(psi.shape[0])
        ov = self._apply(self.eig_vh, psi)
        w = ov.real ** 2 + ov.imag ** 2
        fid = np.stack([w[:, g].sum(axis=-1) for g in self.group_index], axis=1) / n2[:, None]
        best = np.argmax(fid, axis=1)
        return m, var, best, np.minimum(1.0, fid[np.arange(psi.shape[0]), best])


def _as_amplitudes(psi, dim: int, tol: float = 1e-6) -> np.ndarray:
    v = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)
    if v.shape != (dim,):
        raise DimensionError(f"state has shape {v.shape}, model dimension is {dim}")
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ArgumentError("state must be normalized")
    return v


def drift_term(model: ModelSpec, psi) -> np.ndarray:
    """Deterministic part of the increment per unit time (not normalized)."""
    v = _as_amplitudes(psi, model.dim)
    return _Engine(model).drift(v[None, :])[0]


def diffusion_term(model: ModelSpec, psi, noise: WienerIncrement, gain: float = NOISE_GAIN) -> np.ndarray:
    """Stochastic part ``gain * sum_j (L_j - <L_j>) psi dxi_j``."""
    v = _as_amplitudes(psi, model.dim)
    values = np.asarray(noise.values if isinstance(noise, WienerIncrement) else noise, dtype=complex)
    if values.shape != (model.channel_count,):
        raise ChannelCountError(
            f"noise has {values.size} channels, model has {model.channel_count}")
    return _Engine(model, gain).diffusion(v[None, :], values[None, :])[0]


def step(model: ModelSpec, psi, config: IntegrationConfig, stream: NoiseStream) -> StateVector:
    """Advance one time step and renormalize."""
    config.check_model(model)
    v = _as_amplitudes(psi, model.dim)
    if stream.channel_count != model.channel_count:
        raise ChannelCountError("stream channel count does not match the model")
    dxi = stream.next_increments(config.dt).values
    out = _Engine(model, config.noise_gain).advance(v[None, :], dxi[None, :], config.dt)
    n2 = (out.real ** 2 + out.imag ** 2).sum(axis=-1)
    if not (np.all(np.isfinite(n2)) and n2[0] > 0):
        raise NonFiniteError("state became non-finite; dt is too large", step=1)
    return StateVector((out / np.sqrt(n2)[:, None])[0])


def run_batch(model: ModelSpec, psi0, config: IntegrationConfig, streams, indices=None) -> list[TrajectoryRecord]:
    """Integrate one trajectory per stream, all from ``psi0``, in lockstep.

    ``streams`` may be any objects exposing ``channel_count`` and
    ``standard_block(n)`` (see :class:`qsd.noise.NoiseStream`).
    """
    config.check_model(model)
    v0 = _as_amplitudes(psi0, model.dim, tol=1e-12)
    streams = list(streams)
    for s in streams:
        if s.channel_count != model.channel_count:
            raise ChannelCountError("stream channel count does not match the model")
    if indices is None:
        indices = list(range(len(streams)))
    eng = _Engine(model, config.noise_gain)
    B, J, dim = len(streams), model.channel_count, model.dim
    dt, stride, n_steps = config.dt, config.record_stride, config.n_steps
    n_rec = n_steps // stride + 1
    scale = math.sqrt(dt / 2)

    exps = np.zeros((B, n_rec, J), dtype=complex)
    vars_ = np.zeros((B, n_rec, len(eng.hermitian)))
    fids = np.zeros((B, n_rec))
    snaps = np.zeros((B, n_rec, dim), dtype=complex) if config.keep_snapshots else None
    n_recorded = np.zeros(B, dtype=int)
    steps_taken = np.full(B, n_steps)
    finals = np.zeros((B, dim), dtype=complex)
    run_len = np.zeros(B, dtype=int)
    run_group = np.full(B, -1)
    run_start = np.zeros(B)

    def _unit(x):
        if config.renormalize_every == 1:
            return x
        return x / np.sqrt((x.real ** 2 + x.imag ** 2).sum(axis=-1))[:, None]

    psi = np.repeat(v0[None, :], B, axis=0)
    active = np.arange(B)
    noise = None

    def record(step_no: int):
        nonlocal psi, active, noise
        unit = _unit(psi)
        m, var, best, fid = eng.observe(unit)
        k = n_recorded[active]
        exps[active, k] = m
        vars_[active, k] = var
        fids[active, k] = fid
        if snaps is not None:
            snaps[active, k] = unit
        n_recorded[active] += 1
        t = step_no * dt
        ok = best >= 0
        if var.shape[1]:
            ok &= var.max(axis=1) <= config.convergence_var_tol
        ok &= fid >= 1.0 - config.convergence_fid_tol
        same = ok & (run_group[active] == best) & (run_len[active] > 0)
        fresh = ok & ~same
        run_len[active] = np.where(same, run_len[active] + 1, np.where(fresh, 1, 0))
        run_start[active] = np.where(fresh, t, run_start[active])
        run_group[active] = np.where(ok, best, -1)
        if config.stop_on_collapse:
            done = run_len[active] >= SUSTAIN_STRIDES
            if done.any():
                finals[active[done]] = unit[done]
                steps_taken[active[done]] = step_no
                keep = ~done
                active, psi = active[keep], psi[keep]
                if noise is not None:
                    noise = noise[keep]

    record(0)
    for n in range(n_steps):
        if active.size == 0:
            break
        blk = n % NOISE_BLOCK
        if blk == 0:
            size = min(NOISE_BLOCK, n_steps - n)
            noise = np.stack([streams[i].standard_block(size) for i in active]) * scale
        psi = eng.advance(psi, noise[:, blk], dt)
        n2 = (psi.real ** 2 + psi.imag ** 2).sum(axis=-1)
        if not np.all(np.isfinite(n2)) or np.any(n2 == 0):
            bad = active[~np.isfinite(n2) | (n2 == 0)][0]
            raise NonFiniteError(f"trajectory {indices[bad]} became non-finite at step {n + 1}; "
                                 "reduce dt", step=n + 1, trajectory=indices[bad])
        if (n + 1) % config.renormalize_every == 0:
            psi = psi / np.sqrt(n2)[:, None]
        if (n + 1) % stride == 0:
            record(n + 1)
    if active.size:
        finals[active] = _unit(psi)

    out = []
    for b in range(B):
        k = n_recorded[b]
        decided = run_len[b] >= SUSTAIN_STRIDES
        group = int(run_group[b]) if decided else None
        out.append(TrajectoryRecord(
            times=np.arange(k) * (stride * dt),
            expectations=exps[b, :k].copy(),
            variances=vars_[b, :k].copy(),
            fidelities=fids[b, :k].copy(),
            labels=model.labels,
            hermitian_channels=eng.hermitian,
            final_state=StateVector(finals[b]),
            steps_taken=int(steps_taken[b]),
            collapsed_to=group,
            collapsed_value=float(eng.group_values[group]) if decided else None,
            collapse_time=float(run_start[b]) if decided else None,
            snapshots=snaps[b, :k].copy() if snaps is not None else None,
            trajectory_index=indices[b],
        ))
    return out


def run_trajectory(model: ModelSpec, psi0, config: IntegrationConfig, stream: NoiseStream) -> TrajectoryRecord:
    """Integrate a single trajectory to ``t_max`` or until collapse is sustained.

    The collapse criterion holds at a record point when every Hermitian
    channel has variance <= ``convergence_var_tol`` and the state lies in one
    eigenspace of the verdict channel (the first Hermitian channel with more
    than one distinct eigenvalue) up to ``convergence_fid_tol``.  It must hold
    for ``SUSTAIN_STRIDES`` consecutive record points with the same eigenspace.
    """
    return run_batch(model, psi0, config, [stream], indices=[stream.stream_id])[0]


def collapse_time(record: TrajectoryRecord) -> float | None:
    return record.collapse_time


def verdict_eigensystem(model: ModelSpec) -> tuple[int | None, Eigensystem | None]:
    eng = _Engine(model)
    return eng.verdict_channel, eng.eigen
