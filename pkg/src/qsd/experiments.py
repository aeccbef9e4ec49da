"""Trajectory ensembles and the statistics run on them."""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (ArgumentError, GridMismatchError, InsufficientDataError, QSDError,
                     UndecidedError)
from .integrator import IntegrationConfig, ModelSpec, TrajectoryRecord, run_batch
from .linalg import DensityMatrix, Eigensystem, StateVector, fidelity_to_eigenspace, trace_distance
from .models import LocalizationChain, build_localization_model, plus_state
from .noise import derive_stream, parse_seed
from .oracle import MasterEvolution, propagate

Z_BOUND = 4.0
MAX_UNDECIDED_BORN = 0.01
MAX_UNDECIDED_SCALING = 0.05


class TrajectoryError(QSDError):
    """Wraps an error raised inside one trajectory of an ensemble."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"trajectory {index}: {cause}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    n_trajectories: int
    seed: int
    times: np.ndarray
    labels: tuple[str, ...]
    outcomes: np.ndarray  # collapsed eigenvalue per trajectory, nan if undecided
    collapse_times: np.ndarray  # decided trajectories only, index order
    mean_observables: np.ndarray  # (T, channels) complex
    stderr_observables: np.ndarray  # (T, channels)
    ensemble_rho: np.ndarray | None  # (T, dim, dim)

    @property
    def decided(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.outcomes)))

    @property
    def undecided(self) -> int:
        return self.n_trajectories - self.decided

    @property
    def outcome_histogram(self) -> dict[float, int]:
        vals, counts = np.unique(self.outcomes[~np.isnan(self.outcomes)], return_counts=True)
        return {float(v): int(c) for v, c in zip(vals, counts)}

    def rho(self, i: int) -> DensityMatrix:
        if self.ensemble_rho is None:
            raise ArgumentError("ensemble was run without keep_rho")
        return DensityMatrix(self.ensemble_rho[i], tolerance_scale=10.0)

    def to_json(self) -> dict:
        out = {
            "n_trajectories": self.n_trajectories,
            "seed": self.seed,
            "decided": self.decided,
            "undecided": self.undecided,
            "outcome_histogram": {f"{k:.17g}": v for k, v in self.outcome_histogram.items()},
            "collapse_times": [float(t) for t in self.collapse_times],
            "times": [float(t) for t in self.times],
            "mean_observables": {
                lab: {"re": self.mean_observables[:, j].real.tolist(),
                      "im": self.mean_observables[:, j].imag.tolist(),
                      "stderr": self.stderr_observables[:, j].tolist()}
                for j, lab in enumerate(self.labels)},
        }
        return out


def _chunk_worker(args):
    model, psi0, config, seed, lo, hi = args
    streams = [derive_stream(seed, i, model.channel_count) for i in range(lo, hi)]
    try:
        return run_batch(model, psi0, config, streams, indices=list(range(lo, hi)))
    except QSDError as exc:
        idx = getattr(exc, "trajectory", None)
        raise TrajectoryError(lo if idx is None else idx, exc) from exc


def run_records(model: ModelSpec, psi0, config: IntegrationConfig, n_trajectories: int, seed: int,
                workers: int = 1, chunk_size: int = 256) -> list[TrajectoryRecord]:
    """Trajectory records for indices ``0..n-1``, in index order.

    Trajectory ``i`` always uses the noise stream ``(seed, i)``, so the
    records do not depend on ``workers`` or ``chunk_size``.
    """
    if n_trajectories < 1:
        raise ArgumentError("n_trajectories must be >= 1")
    if chunk_size < 1 or workers < 1:
        raise ArgumentError("workers and chunk_size must be >= 1")
    seed = parse_seed(seed)
    config.check_model(model)
    jobs = [(model, psi0, config, seed, lo, min(lo + chunk_size, n_trajectories))
            for lo in range(0, n_trajectories, chunk_size)]
    if workers == 1 or len(jobs) == 1:
        parts = [_chunk_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_worker, jobs))
    return [r for part in parts for r in part]


def _padded(arrays: list[np.ndarray], length: int) -> np.ndarray:
    # trajectories stopped at collapse hold their last recorded value
    out = []
    for a in arrays:
        if a.shape[0] < length:
            a = np.concatenate([a, np.repeat(a[-1:], length - a.shape[0], axis=0)])
        out.append(a)
    return np.stack(out)


def summarize(records: list[TrajectoryRecord], seed: int, config: IntegrationConfig,
              keep_rho: bool) -> EnsembleResult:
    n = len(records)
    length = config.n_steps // config.record_stride + 1
    times = np.arange(length) * (config.record_stride * config.dt)
    exps = _padded([r.expectations for r in records], length)
    mean = exps.mean(axis=0)
    if n > 1:
        spread = exps.real.var(axis=0, ddof=1) + exps.imag.var(axis=0, ddof=1)
        stderr = np.sqrt(spread / n)
    else:
        stderr = np.zeros(mean.shape)
    rho = None
    if keep_rho:
        snaps = _padded([r.snapshots for r in records], length)
        rho = (snaps[:, :, :, None] * snaps.conj()[:, :, None, :]).mean(axis=0)
    outcomes = np.array([np.nan if r.collapsed_value is None else r.collapsed_value for r in records])
    ctimes = np.array([r.collapse_time for r in records if r.collapse_time is not None], dtype=float)
    return EnsembleResult(n, seed, times, records[0].labels, outcomes, ctimes, mean, stderr, rho)


def run_ensemble(model: ModelSpec, psi0, config: IntegrationConfig, n_trajectories: int, seed: int,
                 workers: int = 1, chunk_size: int = 256, keep_rho: bool = True) -> EnsembleResult:
    """Run ``n_trajectories`` trajectories and average them in index order.

    With ``config.stop_on_collapse`` set, a stopped trajectory contributes its
    final recorded state to every later sample time; that is exact only when
    the collapsed state is stationary (eigenstate of L commuting with H).
    """
    seed = parse_seed(seed)
    if keep_rho and not config.keep_snapshots:
        config = dataclasses.replace(config, keep_snapshots=True)
    records = run_records(model, psi0, config, n_trajectories, seed, workers, chunk_size)
    return summarize(records, seed, config, keep_rho)


@dataclass(frozen=True)
class BornReport:
    values: tuple[float, ...]
    expected: tuple[float, ...]
    counts: tuple[int, ...]
    frequencies: tuple[float, ...]
    z_scores: tuple[float, ...]
    decided: int
    undecided: int
    passed: bool

    def to_json(self) -> dict:
        return {
            "decided": self.decided,
            "undecided": self.undecided,
            "z_bound": Z_BOUND,
            "passed": self.passed,
            "outcomes": [
                {"eigenvalue": v, "expected": e, "count": c, "frequency": f,
                 "z": z if math.isfinite(z) else str(z)}
                for v, e, c, f, z in zip(self.values, self.expected, self.counts,
                                         self.frequencies, self.z_scores)],
        }


def born_from_histogram(histogram: dict[float, int], undecided: int, psi0: StateVector,
                        es: Eigensystem) -> BornReport:
    decided = sum(histogram.values())
    if decided < 100:
        raise InsufficientDataError(f"only {decided} decided trajectories; need at least 100")
    counts = [0] * len(es.groups)
    for value, c in histogram.items():
        counts[es.group_of(value)] += c
    values, expected, freqs, zs = [], [], [], []
    for g in range(len(es.groups)):
        p = fidelity_to_eigenspace(psi0, es, g)
        f = counts[g] / decided
        se = math.sqrt(p * (1 - p) / decided)
        if se > 0:
            z = (f - p) / se
        else:
            z = 0.0 if abs(f - p) < 1e-12 else math.copysign(math.inf, f - p)
        values.append(float(es.group_values[g]))
        expected.append(p)
        freqs.append(f)
        zs.append(z)
    undecided_ok = undecided <= MAX_UNDECIDED_BORN * (decided + undecided)
    passed = undecided_ok and all(abs(z) < Z_BOUND for z in zs)
    return BornReport(tuple(values), tuple(expected), tuple(counts), tuple(freqs), tuple(zs),
                      decided, undecided, passed)


def born_test(result: EnsembleResult, psi0: StateVector, es: Eigensystem) -> BornReport:
    """Compare collapse frequencies with |<l|psi0>|^2, one z-score per eigenspace."""
    return born_from_histogram(result.outcome_histogram, result.undecided, psi0, es)


@dataclass(frozen=True)
class OracleComparison:
    times: np.ndarray
    distances: np.ndarray
    budget: float
    passed: np.ndarray

    @property
    def max_distance(self) -> float:
        return float(self.distances.max())

    @property
    def all_passed(self) -> bool:
        return bool(self.passed.all())


def error_budget(n_trajectories: int) -> float:
    return max(0.02, 5.0 / math.sqrt(n_trajectories))


def oracle_comparison(result: EnsembleResult, ev: MasterEvolution | list, budget: float | None = None) -> OracleComparison:
    """Trace distance between the ensemble average and the master equation.

    ``ev`` may also be an already propagated list of density matrices on
    ``result.times``.
    """
    if result.ensemble_rho is None:
        raise ArgumentError("ensemble was run without keep_rho")
    if isinstance(ev, MasterEvolution):
        if ev.times.shape != result.times.shape or not np.allclose(ev.times, result.times, rtol=1e-12, atol=1e-12):
            raise GridMismatchError("oracle and ensemble sample grids differ")
        rhos = propagate(ev)
    else:
        rhos = list(ev)
        if len(rhos) != len(result.times):
            raise GridMismatchError("oracle and ensemble sample grids differ")
    d = np.array([trace_distance(result.ensemble_rho[i], np.asarray(r)) for i, r in enumerate(rhos)])
    b = error_budget(result.n_trajectories) if budget is None else budget
    return OracleComparison(result.times.copy(), d, b, d <= b)


@dataclass(frozen=True)
class ScalingRow:
    n_particles: int
    mean_collapse_time: float
    stderr: float
    decided: int
    undecided: int


@dataclass(frozen=True)
class ScalingTable:
    rows: tuple[ScalingRow, ...]
    exponent: float | None

    @property
    def monotone_decreasing(self) -> bool:
        taus = [r.mean_collapse_time for r in self.rows]
        return all(b < a for a, b in zip(taus, taus[1:]))


def fit_power_law(ns, taus) -> float:
    """Least-squares slope of log(tau) against log(N)."""
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(taus, float)), 1)
    return float(slope)


def scaling_study(chain_family, config: IntegrationConfig, n_per_point: int, seed: int,
                  workers: int = 1, chunk_size: int = 256) -> ScalingTable:
    """Mean collapse time of the N-particle pointer for each chain in the family."""
    if n_per_point < 100:
        raise ArgumentError("n_per_point must be >= 100")
    chains = sorted(chain_family, key=lambda c: c.n_particles)
    if len({c.n_particles for c in chains}) != len(chains):
        raise ArgumentError("chain family has repeated particle numbers")
    rows = []
    for chain in chains:
        model, _, _ = build_localization_model(chain)
        recs = run_records(model, plus_state(2), config, n_per_point, seed, workers, chunk_size)
        tau = np.array([r.collapse_time for r in recs if r.decided])
        undecided = n_per_point - tau.size
        if undecided > MAX_UNDECIDED_SCALING * n_per_point:
            raise UndecidedError(
                f"N={chain.n_particles}: {undecided}/{n_per_point} trajectories undecided at "
                f"t_max={config.t_max}; increase t_max")
        se = float(tau.std(ddof=1) / math.sqrt(tau.size)) if tau.size > 1 else math.nan
        rows.append(ScalingRow(int(chain.n_particles), float(tau.mean()), se, int(tau.size), undecided))
    exponent = None
    if len(rows) > 1:
        exponent = fit_power_law([r.n_particles for r in rows], [r.mean_collapse_time for r in rows])
    return ScalingTable(tuple(rows), exponent)


def default_chain_family(ns=(1, 2, 4, 8), coupling=None, separation=1.0) -> list[LocalizationChain]:
    kw = {} if coupling is None else {"coupling": coupling}
    return [LocalizationChain(n, branch_separation=separation, **kw) for n in ns]
