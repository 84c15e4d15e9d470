"""Spectral constants of the vortex-forced steady state as the forcing amplitude grows.

Shows where the stabilization hypothesis (lambda0 > 0) and gamma1 > 0 are lost
and how the admissible rate alpha_max shrinks with kappa.
"""

import argparse

from kvlab.discretization import FlowParameters, GridSpec
from kvlab.shapes import steady_forcing
from kvlab.spectral import alpha_bound, compute_constants
from kvlab.steady import SteadyProblem, solve_steady


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=32)
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--amplitudes", default="5,50,500,1000,3000,6000")
    ap.add_argument("--forcing", default="vortex")
    args = ap.parse_args()
    g = GridSpec(args.grid)
    print("amp     Re~|u|/nu  lambda1    lambda0     gamma1    alpha_max(0) alpha_max(0.1) N")
    for a in (float(x) for x in args.amplitudes.split(",")):
        prob = SteadyProblem(FlowParameters(args.nu, 0.0), steady_forcing(args.forcing, g, a, args.nu))
        st = solve_steady(prob)
        if not st.converged:
            print(f"{a:6g}  steady solve: {st.status}")
            continue
        sc = compute_constants(st.u_inf, args.nu, 0.0, 500)
        am1 = alpha_bound(sc, 0.1) if sc.gamma1 > 0 else float("nan")
        umax = abs(st.u_inf.to_vector()).max()
        print(f"{a:6g}  {umax / args.nu:9.4f}  {sc.lambda1:.5f}  {sc.lambda0:10.5f}  {sc.gamma1:8.5f}  "
              f"{sc.alpha_max:10.5f}  {am1:12.5f}  {sc.n_estimate:.3e}")


if __name__ == "__main__":
    main()
