#!/usr/bin/env python3
"""Three routes to the mean of a linear diffusion.

For constant diffusion the mean path solves a linear ODE, so the
matrix exponential gives it exactly.  The same number comes out of
the Euler scheme (up to O(dt) weak error plus Monte Carlo noise) and
out of the truncated generator expansion (up to the series tail).
"""

import math

import numpy as np

from rmsde.algebra import Polynomial
from rmsde.dynamics import (IntegratorConfig, SystemParams, exact_mean_linear,
                            simulate_paths)
from rmsde.generator import taylor_mean_numericJ
from rmsde.rng import PURPOSE_NOISE, RngStream


def main() -> None:
    n, t = 4, 0.8
    rng = np.random.default_rng(3)
    params = SystemParams(rng.standard_normal((n, n)) / math.sqrt(n),
                          -0.8 * np.eye(n),
                          rng.uniform(-0.5, 0.5, n),
                          np.vstack([np.full(n, 0.6), np.zeros((n, n))]))
    x0 = rng.uniform(-1.0, 1.0, n)

    exact = exact_mean_linear(params, x0, t)
    print("matrix-exponential mean:", np.array2string(exact, precision=6))

    batch = simulate_paths(params, x0, IntegratorConfig(1e-3, t, (t,)),
                           RngStream(3, 0, PURPOSE_NOISE), n_paths=20_000)
    gap = np.abs(batch.mean_x()[0] - exact)
    print(f"euler over 20k paths:    max gap {gap.max():.2e} "
          f"(se up to {batch.se_x()[0].max():.2e})")

    for k in (2, 4, 8, 16):
        series = np.array([taylor_mean_numericJ(Polynomial.from_x(j), params,
                                                x0, t, k=k)
                           for j in range(1, n + 1)])
        print(f"series order {k:2d}:         max gap "
              f"{np.abs(series - exact).max():.2e}")


if __name__ == "__main__":
    main()
