"""Mean single-particle collapse time of the two-branch pointer versus coupling.

Used to pick models.DEFAULT_COUPLING (target: ~10 time units at s = 1).
"""

import argparse
import time

import numpy as np

from qsd.integrator import IntegrationConfig, run_batch
from qsd.models import LocalizationChain, build_localization_model, plus_state
from qsd.noise import derive_stream


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--couplings", default="0.5,0.75,1.0")
    ap.add_argument("-n", type=int, default=300)
    ap.add_argument("--dt", type=float, default=0.002)
    ap.add_argument("--t-max", type=float, default=80.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for lam in map(float, args.couplings.split(",")):
        model, _, _ = build_localization_model(LocalizationChain(1, lam))
        cfg = IntegrationConfig(dt=args.dt, t_max=args.t_max, record_stride=25)
        t0 = time.time()
        recs = run_batch(model, plus_state(), cfg, [derive_stream(args.seed, i, 1) for i in range(args.n)])
        tau = np.array([r.collapse_time for r in recs if r.decided])
        print(f"lambda={lam:g}  decided={tau.size}/{args.n}  mean={tau.mean():.3f}  "
              f"se={tau.std(ddof=1) / np.sqrt(tau.size):.3f}  max={tau.max():.2f}  ({time.time() - t0:.1f}s)")


if __name__ == "__main__":
    main()
