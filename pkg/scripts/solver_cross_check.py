#!/usr/bin/env python3
"""Cross-validate the four independent answers for the base-stock system:
exact product form, truncated elimination solve, uniformized power iteration,
and Monte Carlo simulation."""

import argparse

import numpy as np

from envqueue.catalog import base_stock
from envqueue.numerics import metrics, solve_truncated
from envqueue.separability import product_form
from envqueue.simulate import SimConfig, simulate


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0)
    parser.add_argument("--mu", type=float, default=2.0)
    parser.add_argument("--nu", type=float, default=1.0)
    parser.add_argument("--b", type=int, default=2)
    parser.add_argument("--N", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    model = base_stock(lam=args.lam, mu=args.mu, nu=args.nu, b=args.b)
    pf = product_form(model)
    print(f"product form: theta = {np.round(pf.theta, 10)}, C = {pf.C:.10g}")

    elim = solve_truncated(model, args.N, method="elimination")
    power = solve_truncated(model, args.N, method="power")
    tv = 0.5 * float(np.abs(elim.pi - power.pi).sum())
    print(f"elimination vs power at N={args.N}: TV = {tv:.3e}")

    exact = np.array([pf.level_vector(n) for n in range(args.N + 1)])
    print(f"elimination vs product form: TV = {0.5 * float(np.abs(elim.pi - exact).sum()):.3e}")

    m = metrics(elim, model)
    sim = simulate(model, SimConfig(seed=args.seed, horizon=2e4, replications=10))
    print(f"throughput: exact-solve {m.throughput:.6f}  "
          f"simulated {sim.estimate.mean:.6f} +/- {sim.estimate.half_width:.6f}")


if __name__ == "__main__":
    main()
