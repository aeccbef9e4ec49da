"""Run every experiment with its default configuration.

    python3 scripts/run_experiments.py [--out results] [--seed N] [--workers K]

Each command writes into its own subdirectory; the exit status of each run
is printed, and the script exits non-zero if any run failed.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from qsd.cli import main as qsd

RUNS = {
    "fig1": ["fig1"],
    "born": ["born"],
    "ensemble": ["ensemble", "n_trajectories=10000"],
    "oracle": ["oracle"],
    "scaling": ["scaling"],
}


def headline(name: str, out: Path) -> str:
    if name == "born":
        rep = json.loads((out / "born_report.json").read_text())
        return "frequencies " + ", ".join(f"{o['eigenvalue']:g}:{o['frequency']:.3f}"
                                          for o in rep["outcomes"] if o["expected"] > 0)
    if name == "ensemble":
        cmp = json.loads((out / "ensemble.json").read_text())["oracle_comparison"]
        return f"max trace distance {cmp['max_trace_distance']:.4f}"
    if name == "scaling":
        rep = json.loads((out / "scaling.json").read_text())
        taus = ", ".join(f"N={r['n_particles']}:{r['mean_collapse_time']:.2f}" for r in rep["rows"])
        return f"{taus}; exponent {rep['exponent']:.3f}"
    if name == "fig1":
        rep = json.loads((out / "trajectory_report.json").read_text())
        return "levels " + ", ".join(f"{t['collapsed_value']:g}" for t in rep["trajectories"])
    return ""


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", default="0")
    ap.add_argument("--workers", default="1")
    args = ap.parse_args()
    failed = 0
    for name, argv in RUNS.items():
        out = Path(args.out) / name
        t0 = time.perf_counter()
        status = qsd(argv + ["--seed", args.seed, "--out", str(out), "--workers", args.workers])
        line = f"{name:<9} exit {status}  {time.perf_counter() - t0:6.1f}s"
        if status in (0, 4):
            line += "  " + headline(name, out)
        print(line, flush=True)
        failed += status != 0
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
