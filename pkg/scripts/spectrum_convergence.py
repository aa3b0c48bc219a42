"""Relative error of the logarithmic spectrum against resolution and box size."""
import argparse

import numpy as np

from nls_perturb.bdg import linearize, solve_modes
from nls_perturb.discretization import build_grid
from nls_perturb.model import Logarithmic, certify
from nls_perturb.reference import log_background, log_gamma


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, nargs="+", default=(101, 201, 401, 801))
    ap.add_argument("--half-widths", type=float, nargs="+", default=(6.0, 8.0, 10.0, 12.0))
    ap.add_argument("--scheme", choices=("spectral", "fd4"), default="spectral")
    ap.add_argument("--count", type=int, default=5)
    args = ap.parse_args()

    exact = np.array([log_gamma((n,)) for n in range(2, 2 + args.count)])
    print("half_width,n_points,max_rel_error")
    for hw in args.half_widths:
        for n in args.points:
            grid = build_grid("line", n, half_width=hw, scheme=args.scheme)
            f, omega = log_background(grid.x)
            f[0] = f[-1] = 0.0
            bg = certify(grid, f, omega, 0 * f, Logarithmic(), tol=1e-6)
            gam = solve_modes(linearize(bg), args.count).gammas
            print(f"{hw},{n},{np.max(np.abs(gam / exact - 1)):.3e}")


if __name__ == "__main__":
    main()
