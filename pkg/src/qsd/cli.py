"""Batch front-end.

    qsd <command> [--config FILE] [--seed N] [--out DIR] [key=value ...]

Commands: trajectory, ensemble, oracle, born, scaling, fig1.

The config file is flat ``key=value`` text (``#`` starts a comment).  Values
given on the command line override the file.  ``auto`` (the default for
several keys) is resolved at parse time from the command and model, so a
parsed :class:`RunConfig` is always concrete; :func:`emit` writes it back out
and ``parse_config(emit(c)) == c``.

Seed precedence: ``--seed`` > config ``seed`` > ``$QSD_SEED`` > 0.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 statistical check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ArgumentError, InsufficientDataError, NumericalError, ParseError, QSDError,
                     UndecidedError, ValidationError)
from .experiments import (TrajectoryError, born_test, default_chain_family, oracle_comparison,
                          run_ensemble, run_records, scaling_study, summarize)
from .integrator import DT_NORM_BOUND, IntegrationConfig, ModelSpec, verdict_eigensystem
from .linalg import StateVector, outer_product
from .models import (DEFAULT_COUPLING, LocalizationChain, build_dephasing_qubit,
                     build_localization_model, build_photon_number_model, fig1_initial_state,
                     plus_state)
from .noise import U64_MAX, parse_seed
from .oracle import MasterEvolution, propagate
from .output import expectation_svg, trajectory_rows, write_csv, write_json

COMMANDS = ("trajectory", "ensemble", "oracle", "born", "scaling", "fig1")
MODELS = ("photon_number", "dephasing", "localization")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_STATISTICAL = 0, 2, 3, 4

# command -> defaults for keys whose default depends on the command
COMMAND_DEFAULTS = {
    "trajectory": dict(model="photon_number", n_trajectories=1, stop_on_collapse=True),
    "fig1": dict(model="photon_number", n_trajectories=5, stop_on_collapse=True),
    "born": dict(model="photon_number", n_trajectories=2000, stop_on_collapse=True),
    "ensemble": dict(model="dephasing", n_trajectories=1000, stop_on_collapse=False),
    "oracle": dict(model="dephasing", n_trajectories=1, stop_on_collapse=False),
    "scaling": dict(model="localization", n_trajectories=500, stop_on_collapse=True),
}
MODEL_DEFAULTS = {
    "photon_number": dict(initial_state="fig1", t_max=10.0, record_interval=0.01),
    "dephasing": dict(initial_state="plus", t_max=3.0, record_interval=0.1),
    "localization": dict(initial_state="plus", t_max=60.0, record_interval=0.05),
}

SCALING_EXPONENT_BAND = (-1.5, -0.5)

KEY_DOCS = {
    "model": "photon_number | dephasing | localization (default depends on command)",
    "n_max": "Fock truncation for photon_number (default 9)",
    "rate": "dephasing rate of the qubit model (default 1.0)",
    "n_particles": "pointer particle number for localization (default 1)",
    "coupling": f"per-particle collapse coupling lambda (default {DEFAULT_COUPLING})",
    "separation": "distance between the two pointer branches (default 1.0)",
    "scaling_n": "particle numbers for the scaling command (default 1,2,4,8)",
    "initial_state": "fig1 | plus | fock:N | custom (default: fig1 for photon_number, plus otherwise)",
    "amplitudes": "comma-separated complex amplitudes for initial_state=custom",
    "dt": "time step; auto = 0.01 / sum_j ||L_j||^2 rounded down to one digit, at most 0.01",
    "t_max": "integration horizon (auto: 10 photon_number, 3 dephasing, 60 localization)",
    "var_tol": "collapse criterion: variance tolerance (default 1e-6)",
    "fid_tol": "collapse criterion: 1 - eigenspace fidelity tolerance (default 1e-6)",
    "record_stride": "steps between recorded points (auto from a per-model record interval)",
    "renormalize_every": "steps between renormalizations (default 1)",
    "stop_on_collapse": "stop trajectories once collapse is sustained (default depends on command)",
    "n_trajectories": "trajectory count (default depends on command)",
    "seed": "u64 seed, decimal or 0x-hex (default 0)",
    "oracle_dt": "RK4 step for the master equation (auto from operator norms)",
    "out": "output directory (default qsd_out)",
    "csv": "write CSV outputs (default true)",
    "json": "write JSON outputs (default true)",
    "svg": "write SVG plots (default true)",
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: str
    n_max: int
    rate: float
    n_particles: int
    coupling: float
    separation: float
    scaling_n: tuple[int, ...]
    initial_state: str
    amplitudes: tuple[complex, ...]
    dt: float
    t_max: float
    var_tol: float
    fid_tol: float
    record_stride: int
    renormalize_every: int
    stop_on_collapse: bool
    n_trajectories: int
    seed: int
    oracle_dt: float
    out: str
    csv: bool
    json: bool
    svg: bool

    def integration(self) -> IntegrationConfig:
        return IntegrationConfig(
            dt=self.dt, t_max=self.t_max, renormalize_every=self.renormalize_every,
            convergence_var_tol=self.var_tol, convergence_fid_tol=self.fid_tol,
            record_stride=self.record_stride, stop_on_collapse=self.stop_on_collapse)

    def build_model(self, n_particles: int | None = None) -> ModelSpec:
        if self.model == "photon_number":
            return build_photon_number_model(self.n_max)
        if self.model == "dephasing":
            return build_dephasing_qubit(self.rate)
        chain = LocalizationChain(n_particles or self.n_particles, self.coupling, self.separation)
        return build_localization_model(chain)[0]

    def initial(self) -> StateVector:
        return _initial_state(self.initial_state, self.amplitudes, self.build_model().dim, self.n_max)


def _initial_state(name: str, amplitudes, dim: int, n_max: int) -> StateVector:
    if name == "fig1":
        if dim != n_max + 1:
            raise ArgumentError("initial_state=fig1 needs the photon_number model")
        return fig1_initial_state(n_max)
    if name == "plus":
        return plus_state(dim)
    if name.startswith("fock:"):
        return StateVector.basis(dim, int(name[5:]))
    if name == "custom":
        if len(amplitudes) != dim:
            raise ArgumentError(f"amplitudes has {len(amplitudes)} entries, model dimension is {dim}")
        return StateVector.normalized(np.array(amplitudes, dtype=complex))
    raise ArgumentError(f"unknown initial_state {name!r}")


# parsing ------------------------------------------------------------------

def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int(s: str) -> int:
    f = float(s)
    if not f.is_integer():
        raise ValueError(f"not an integer: {s!r}")
    return int(s) if s.strip().lstrip("+-").isdigit() else int(f)


def _ints(s: str) -> tuple[int, ...]:
    return tuple(_int(p) for p in s.split(",") if p.strip())


def _complexes(s: str) -> tuple[complex, ...]:
    return tuple(complex(p.strip().replace(" ", "")) for p in s.split(",") if p.strip())


def _seed(s: str) -> int:
    return parse_seed(s)


PARSERS = {
    "model": str.strip, "n_max": _int, "rate": float, "n_particles": _int, "coupling": float,
    "separation": float, "scaling_n": _ints, "initial_state": str.strip, "amplitudes": _complexes,
    "dt": float, "t_max": float, "var_tol": float, "fid_tol": float, "record_stride": _int,
    "renormalize_every": _int, "stop_on_collapse": _bool, "n_trajectories": _int, "seed": _seed,
    "oracle_dt": float, "out": str.strip, "csv": _bool, "json": _bool, "svg": _bool,
}
AUTO_KEYS = {"model", "initial_state", "dt", "t_max", "record_stride", "stop_on_collapse",
             "n_trajectories", "oracle_dt"}


def _read_pairs(text: str, source: str) -> list[tuple[str, str, str]]:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw.strip()!r}", f"{source} line {lineno}")
        k, v = line.split("=", 1)
        pairs.append((k.strip(), v.strip(), f"{source} line {lineno}"))
    return pairs


def _auto_dt(total_norm_sq: float) -> float:
    raw = 0.01 / total_norm_sq if total_norm_sq > 0 else 0.01
    raw = min(raw, 0.01)
    digit = 10.0 ** math.floor(math.log10(raw))
    return math.floor(raw / digit) * digit


def parse_config(command: str, text: str = "", overrides=(), seed=None, out=None,
                 env=None, source: str = "config") -> RunConfig:
    """Build a validated :class:`RunConfig`.

    ``overrides`` are ``key=value`` strings (command-line positionals) and win
    over ``text``.  Raises :class:`ParseError` for malformed input and
    :class:`ValidationError` listing every violated bound.
    """
    if command not in COMMANDS:
        raise ParseError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}", "command")
    env = os.environ if env is None else env
    pairs = _read_pairs(text, source)
    for i, item in enumerate(overrides):
        if "=" not in item:
            raise ParseError(f"expected key=value, got {item!r}", f"argument {i + 1}")
        k, v = item.split("=", 1)
        pairs.append((k.strip(), v.strip(), f"argument {k.strip()}"))

    raw: dict[str, object] = {}
    problems: list[str] = []
    for key, value, ctx in pairs:
        if key not in PARSERS:
            raise ParseError(f"unknown key {key!r}", ctx)
        if value.lower() == "auto" and key in AUTO_KEYS:
            raw.pop(key, None)
            continue
        try:
            raw[key] = PARSERS[key](value)
        except (ValueError, ArgumentError) as exc:
            problems.append(f"{key}: cannot parse {value!r} ({exc}) [{ctx}]")

    if seed is not None:
        try:
            raw["seed"] = parse_seed(seed)
        except ArgumentError as exc:
            problems.append(f"seed: {exc} [--seed]")
    elif "seed" not in raw and "seed" not in {k for k, _, _ in pairs}:
        env_seed = env.get("QSD_SEED")
        if env_seed:
            try:
                raw["seed"] = parse_seed(env_seed)
            except ArgumentError as exc:
                problems.append(f"seed: {exc} [QSD_SEED]")
    if out is not None:
        raw["out"] = str(out)

    cmd_defaults = COMMAND_DEFAULTS[command]
    v = dict(
        command=command,
        model=raw.get("model", cmd_defaults["model"]),
        n_max=raw.get("n_max", 9), rate=raw.get("rate", 1.0),
        n_particles=raw.get("n_particles", 1), coupling=raw.get("coupling", DEFAULT_COUPLING),
        separation=raw.get("separation", 1.0), scaling_n=raw.get("scaling_n", (1, 2, 4, 8)),
        amplitudes=raw.get("amplitudes", ()),
        var_tol=raw.get("var_tol", 1e-6), fid_tol=raw.get("fid_tol", 1e-6),
        renormalize_every=raw.get("renormalize_every", 1),
        stop_on_collapse=raw.get("stop_on_collapse", cmd_defaults["stop_on_collapse"]),
        n_trajectories=raw.get("n_trajectories", cmd_defaults["n_trajectories"]),
        seed=raw.get("seed", 0), out=raw.get("out", "qsd_out"),
        csv=raw.get("csv", True), json=raw.get("json", True), svg=raw.get("svg", True),
    )
    if v["model"] not in MODELS:
        problems.append(f"model: must be one of {', '.join(MODELS)}, got {v['model']!r}")
        raise ValidationError(problems)
    if command == "scaling" and v["model"] != "localization":
        problems.append("model: the scaling command needs model=localization")
    mdef = MODEL_DEFAULTS[v["model"]]
    v["initial_state"] = raw.get("initial_state", mdef["initial_state"])

    for key in ("rate", "coupling", "separation", "var_tol", "fid_tol"):
        if not (math.isfinite(v[key]) and v[key] > 0):
            problems.append(f"{key}: must be positive, got {v[key]!r}")
    if v["n_max"] < 1:
        problems.append(f"n_max: must be >= 1, got {v['n_max']}")
    if v["n_particles"] < 1:
        problems.append(f"n_particles: must be >= 1, got {v['n_particles']}")
    if not v["scaling_n"] or any(n < 1 for n in v["scaling_n"]) or len(set(v["scaling_n"])) != len(v["scaling_n"]):
        problems.append(f"scaling_n: must be distinct positive integers, got {v['scaling_n']}")
    for key in ("renormalize_every", "n_trajectories"):
        if v[key] < 1:
            problems.append(f"{key}: must be >= 1, got {v[key]}")
    if command in ("born", "scaling") and v["n_trajectories"] < 100:
        problems.append(f"n_trajectories: the {command} command needs at least 100")
    if not 0 <= v["seed"] <= U64_MAX:
        problems.append("seed: outside the unsigned 64-bit range")

    model = None
    if not problems:
        try:
            if command == "scaling":
                model = build_localization_model(
                    LocalizationChain(max(v["scaling_n"]), v["coupling"], v["separation"]))[0]
            else:
                model = RunConfig.build_model(_Shim(v))
        except ArgumentError as exc:
            problems.append(f"model: {exc}")

    dt = raw.get("dt")
    if dt is None:
        dt = _auto_dt(model.total_channel_norm_sq()) if model is not None else 0.01
    t_max = raw.get("t_max", mdef["t_max"])
    v["dt"], v["t_max"] = dt, t_max
    if not (math.isfinite(dt) and dt > 0):
        problems.append(f"dt: must be positive, got {dt!r}")
    if not (math.isfinite(t_max) and t_max > 0):
        problems.append(f"t_max: must be positive, got {t_max!r}")
    elif math.isfinite(dt) and dt > 0 and dt > t_max:
        problems.append(f"dt: larger than t_max ({dt!r} > {t_max!r})")
    if model is not None and math.isfinite(dt) and dt > 0:
        bound = dt * model.max_channel_norm_sq()
        if not bound < DT_NORM_BOUND:
            problems.append(f"dt: dt * max_j ||L_j||^2 = {bound:.4g} must be < {DT_NORM_BOUND}")
    stride = raw.get("record_stride")
    if stride is None:
        stride = max(1, int(round(mdef["record_interval"] / dt))) if dt > 0 and math.isfinite(dt) else 1
    v["record_stride"] = stride
    if stride < 1:
        problems.append(f"record_stride: must be >= 1, got {stride}")
    oracle_dt = raw.get("oracle_dt")
    if oracle_dt is None:
        from .oracle import default_dt
        oracle_dt = default_dt(model) if model is not None else 0.01
    v["oracle_dt"] = oracle_dt
    if not (math.isfinite(oracle_dt) and oracle_dt > 0):
        problems.append(f"oracle_dt: must be positive, got {oracle_dt!r}")

    amps = v["amplitudes"]
    if amps:
        norm = math.sqrt(sum(abs(a) ** 2 for a in amps))
        if not (math.isfinite(norm) and norm > 0):
            problems.append("amplitudes: zero or non-finite vector")
        elif abs(norm - 1.0) > 1e-12:
            v["amplitudes"] = tuple(a / norm for a in amps)
    if model is not None:
        try:
            _initial_state(v["initial_state"], v["amplitudes"], model.dim, v["n_max"])
        except (ArgumentError, ValueError) as exc:
            problems.append(f"initial_state: {exc}")
    if problems:
        raise ValidationError(problems)
    return RunConfig(**v)


class _Shim:
    """Attribute view over a partially built config dict."""

    def __init__(self, d):
        self.__dict__.update(d)


def _emit_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, complex):
        return repr(x).strip("()")
    if isinstance(x, tuple):
        return ",".join(_emit_value(e) for e in x)
    return str(x)


def emit(config: RunConfig) -> str:
    """Config text that parses back to ``config`` (command is not included)."""
    lines = []
    for f in dataclasses.fields(config):
        if f.name == "command":
            continue
        lines.append(f"{f.name}={_emit_value(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


# execution ----------------------------------------------------------------

def _manifest(config: RunConfig, outputs: list[str], extra: dict | None = None) -> dict:
    echo = {f.name: getattr(config, f.name) for f in dataclasses.fields(config) if f.name != "out"}
    echo["amplitudes"] = [[a.real, a.imag] for a in config.amplitudes]
    echo["scaling_n"] = list(config.scaling_n)
    text = "".join(line + "\n" for line in emit(config).splitlines() if not line.startswith("out="))
    m = {"qsd_version": __version__, "command": config.command, "seed": config.seed,
         "config": echo, "config_text": text, "outputs": sorted(outputs)}
    if extra:
        m.update(extra)
    return m


def _svg_for(records, model: ModelSpec, title: str) -> str:
    ch, es = verdict_eigensystem(model)
    ch = 0 if ch is None else ch
    levels = list(es.group_values) if es is not None else []
    series = [(r.times, r.expectations[:, ch].real) for r in records]
    if not levels:
        levels = [float(np.min([s[1].min() for s in series])), float(np.max([s[1].max() for s in series]))]
    return expectation_svg(series, levels, title, f"<{model.labels[ch]}>")


def _run_trajectories(config: RunConfig, work: Path, workers: int, chunk: int, svg_name: str | None):
    model = config.build_model()
    records = run_records(model, config.initial(), config.integration(), config.n_trajectories,
                          config.seed, workers, chunk)
    files = []
    if config.csv:
        header, rows = trajectory_rows(records)
        write_csv(work / "trajectories.csv", header, rows)
        files.append("trajectories.csv")
    report = {
        "trajectories": [
            {"index": r.trajectory_index, "verdict": r.verdict, "collapsed_value": r.collapsed_value,
             "collapse_time": r.collapse_time, "steps_taken": r.steps_taken,
             "final_variance": [float(x) for x in r.variances[-1]] if r.variances.size else []}
            for r in records],
    }
    report["all_decided"] = all(r.decided for r in records)
    if config.json:
        write_json(work / "trajectory_report.json", report)
        files.append("trajectory_report.json")
    if svg_name and config.svg:
        (work / svg_name).write_text(_svg_for(records, model, "Collapse trajectories"))
        files.append(svg_name)
    status = EXIT_OK
    if config.command == "fig1" and not report["all_decided"]:
        status = EXIT_STATISTICAL
    return status, files


def _rho_rows(times, rhos):
    dim = rhos[0].shape[0]
    header = ["time"] + [f"rho_{i}_{j}.{part}" for i in range(dim) for j in range(dim) for part in ("re", "im")]
    rows = []
    for t, r in zip(times, rhos):
        row = [float(t)]
        for i in range(dim):
            for j in range(dim):
                row += [float(r[i, j].real), float(r[i, j].imag)]
        rows.append(row)
    return header, rows


def _oracle_rhos(config: RunConfig, times) -> list[np.ndarray]:
    model = config.build_model()
    ev = MasterEvolution(model, outer_product(config.initial()), times, config.oracle_dt)
    return [np.asarray(r) for r in propagate(ev)]


def _run_oracle(config: RunConfig, work: Path):
    cfg = config.integration()
    times = np.arange(cfg.n_steps // cfg.record_stride + 1) * (cfg.record_stride * cfg.dt)
    rhos = _oracle_rhos(config, times)
    files = []
    if config.csv:
        write_csv(work / "rho_timeseries.csv", *_rho_rows(times, rhos))
        files.append("rho_timeseries.csv")
    return EXIT_OK, files


def _run_ensemble(config: RunConfig, work: Path, workers: int, chunk: int):
    model = config.build_model()
    res = run_ensemble(model, config.initial(), config.integration(), config.n_trajectories,
                       config.seed, workers, chunk, keep_rho=True)
    cmp = oracle_comparison(res, _oracle_rhos(config, res.times))
    files = []
    if config.csv:
        header = ["time"]
        for lab in res.labels:
            header += [f"{lab}.re", f"{lab}.im", f"{lab}.stderr"]
        rows = []
        for k, t in enumerate(res.times):
            row = [float(t)]
            for j in range(len(res.labels)):
                m = res.mean_observables[k, j]
                row += [float(m.real), float(m.imag), float(res.stderr_observables[k, j])]
            rows.append(row)
        write_csv(work / "observables.csv", header, rows)
        write_csv(work / "ensemble_rho.csv", *_rho_rows(res.times, res.ensemble_rho))
        write_csv(work / "oracle_comparison.csv", ["time", "trace_distance", "budget", "pass"],
                  [[float(t), float(d), float(cmp.budget), int(p)]
                   for t, d, p in zip(cmp.times, cmp.distances, cmp.passed)])
        files += ["observables.csv", "ensemble_rho.csv", "oracle_comparison.csv"]
    if config.json:
        payload = res.to_json()
        payload["oracle_comparison"] = {"max_trace_distance": cmp.max_distance, "budget": cmp.budget,
                                        "passed": cmp.all_passed}
        write_json(work / "ensemble.json", payload)
        files.append("ensemble.json")
    return (EXIT_OK if cmp.all_passed else EXIT_STATISTICAL), files


def _run_born(config: RunConfig, work: Path, workers: int, chunk: int):
    model = config.build_model()
    psi0 = config.initial()
    cfg = config.integration()
    records = run_records(model, psi0, cfg, config.n_trajectories, config.seed, workers, chunk)
    res = summarize(records, config.seed, cfg, keep_rho=False)
    _, es = verdict_eigensystem(model)
    if es is None:
        raise ArgumentError("the model has no Hermitian channel with distinct eigenvalues")
    try:
        payload = born_test(res, psi0, es).to_json()
    except InsufficientDataError as exc:
        payload = {"decided": res.decided, "undecided": res.undecided, "passed": False, "error": str(exc)}
    files = []
    if config.json:
        write_json(work / "born_report.json", payload)
        files.append("born_report.json")
    return (EXIT_OK if payload["passed"] else EXIT_STATISTICAL), files


def _run_scaling(config: RunConfig, work: Path, workers: int, chunk: int):
    chains = default_chain_family(config.scaling_n, config.coupling, config.separation)
    try:
        table = scaling_study(chains, config.integration(), config.n_trajectories, config.seed,
                              workers, chunk)
    except UndecidedError as exc:
        files = []
        if config.json:
            write_json(work / "scaling.json", {"passed": False, "error": str(exc)})
            files.append("scaling.json")
        return EXIT_STATISTICAL, files
    lo, hi = SCALING_EXPONENT_BAND
    ok = table.monotone_decreasing and (table.exponent is None or lo <= table.exponent <= hi)
    files = []
    if config.csv:
        write_csv(work / "scaling_table.csv",
                  ["n_particles", "mean_collapse_time", "stderr", "decided", "undecided"],
                  [[r.n_particles, r.mean_collapse_time, r.stderr, r.decided, r.undecided]
                   for r in table.rows])
        files.append("scaling_table.csv")
    if config.json:
        write_json(work / "scaling.json", {
            "exponent": table.exponent, "exponent_band": list(SCALING_EXPONENT_BAND),
            "monotone_decreasing": table.monotone_decreasing, "passed": ok,
            "rows": [dataclasses.asdict(r) for r in table.rows]})
        files.append("scaling.json")
    return (EXIT_OK if ok else EXIT_STATISTICAL), files


def execute(config: RunConfig, workers: int = 1, chunk_size: int = 256, log=None) -> int:
    """Run ``config`` and write its artifacts into ``config.out``.

    Outputs are staged in a temporary directory and moved into place at the
    end; on a numerical failure nothing is left behind.  A failed statistical
    check still writes its report (exit code 4).
    """
    log = log or (lambda msg: print(msg, file=sys.stderr))
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    work = Path(tempfile.mkdtemp(prefix=".qsd-partial-", dir=out))
    try:
        c = config.command
        if c in ("trajectory", "fig1"):
            status, files = _run_trajectories(config, work, workers, chunk_size,
                                              "fig1.svg" if c == "fig1" else None)
        elif c == "oracle":
            status, files = _run_oracle(config, work)
        elif c == "ensemble":
            status, files = _run_ensemble(config, work, workers, chunk_size)
        elif c == "born":
            status, files = _run_born(config, work, workers, chunk_size)
        else:
            status, files = _run_scaling(config, work, workers, chunk_size)
        write_json(work / "manifest.json", _manifest(config, files + ["manifest.json"],
                                                     {"exit_status": status}))
        for name in files + ["manifest.json"]:
            os.replace(work / name, out / name)
    except (NumericalError, TrajectoryError) as exc:
        log(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except ArgumentError as exc:
        log(f"invalid configuration: {exc}")
        return EXIT_INVALID
    except QSDError as exc:
        log(f"failure: {exc}")
        return EXIT_NUMERICAL
    finally:
        shutil.rmtree(work, ignore_errors=True)
    if status == EXIT_STATISTICAL:
        log("statistical check failed; see the report in " + str(out))
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qsd", description="Collapse-model trajectory simulator.",
        epilog="config keys:\n" + "\n".join(f"  {k:<18} {d}" for k, d in KEY_DOCS.items()),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", help="u64 seed (decimal or 0x-hex)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, default=1, help="worker processes (does not change results)")
    p.add_argument("--chunk-size", type=int, default=256, help="trajectories per batch (does not change results)")
    p.add_argument("overrides", nargs="*", metavar="key=value")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    try:
        text, source = "", "config"
        if args.config:
            source = args.config
            text = Path(args.config).read_text()
        config = parse_config(args.command, text, args.overrides, seed=args.seed, out=args.out,
                              source=source)
        if args.workers < 1 or args.chunk_size < 1:
            raise ValidationError(["--workers and --chunk-size must be >= 1"])
    except (ParseError, ValidationError, OSError) as exc:
        problems = getattr(exc, "problems", [str(exc)])
        for msg in problems:
            print(f"qsd: {msg}", file=sys.stderr)
        return EXIT_INVALID
    return execute(config, args.workers, args.chunk_size)


if __name__ == "__main__":
    sys.exit(main())
