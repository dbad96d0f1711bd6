#!/usr/bin/env python3
"""Exploratory Sp(4) hypergeometric probe on the thrice-punctured sphere.

Supply the local exponents on the command line:

    python scripts/probe_hypergeometric.py 0.1 0.3 0.7 0.9 -- 0.2 0.4 0.6 0.8

Cusped-surface estimates carry the discarded-trajectory count; nothing
here is an acceptance gate (the non-compact theory is open).
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from lyaplab.brownian import PathConfig
from lyaplab.geometry import cusped_quadrilateral
from lyaplab.lyapunov import estimate_spectrum, symmetry_residual
from lyaplab.presets import build_hypergeometric


def main(argv):
    if "--" not in argv:
        print(__doc__)
        return 2
    split = argv.index("--")
    a = np.array([float(v) for v in argv[:split]])
    b = np.array([float(v) for v in argv[split + 1 :]])
    rep = build_hypergeometric(a, b)
    print(f"rank {rep.n}; invariant symplectic form: {rep.form is not None}")

    surface = cusped_quadrilateral()
    cfg = PathConfig(dt=0.01, horizon=60.0, rng_seed=6021, cusp_y_cap=40.0)
    est = estimate_spectrum(rep, surface, cfg, 200)
    print(f"discarded {est.discarded_trajectories} trajectories in cusp excursions")
    for i, (lam, ci) in enumerate(zip(est.lambdas, est.ci_half_widths), start=1):
        print(f"lambda_{i} = {lam:+.4f} +- {ci:.4f}")
    print(f"lambda_1 + lambda_2 = {est.lambdas[0] + est.lambdas[1]:+.4f}")
    residual, ok = symmetry_residual(est)
    print(f"symmetry residual {residual:.3f} ({'within' if ok else 'outside'} CI)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
