"""Manufactured-solution convergence of the steady solver and the a priori bounds per forcing."""

import argparse

import numpy as np

from kvlab.discretization import FlowParameters, GridSpec
from kvlab.manufactured import manufactured_solution
from kvlab.shapes import steady_forcing
from kvlab.steady import SteadyProblem, check_apriori_bounds, solve_steady


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--amplitude", type=float, default=50.0)
    ap.add_argument("--grids", default="16,32,64,128")
    args = ap.parse_args()

    ms = manufactured_solution(args.nu, args.amplitude, True)
    prev = None
    print("grid  max_error     ratio   picard newton residual")
    for n in (int(x) for x in args.grids.split(",")):
        g = GridSpec(n)
        st = solve_steady(SteadyProblem(FlowParameters(args.nu, 0.0), ms.forcing(g)))
        err = float(np.abs((st.u_inf - ms.velocity(g)).to_vector()).max())
        ratio = f"{prev / err:7.3f}" if prev else "      -"
        print(f"{n:4d}  {err:.5e}  {ratio}  {st.picard_iters:6d} {st.newton_iters:6d} {st.residual:.2e}")
        prev = err

    print("\nforcing       nu|grad u|   |f|_-1     |u|      bound(ii)  L4 ratio")
    g = GridSpec(32)
    for kind, amp in (("vortex", 5.0), ("stream_poly", 5.0), ("manufactured", 1.0)):
        prob = SteadyProblem(FlowParameters(args.nu, 0.0), steady_forcing(kind, g, amp, args.nu))
        rep = check_apriori_bounds(solve_steady(prob), prob)
        print(f"{kind:12s}  {rep['item_i']['lhs']:.5f}  {rep['item_i']['rhs']:.5f}  {rep['item_ii']['lhs']:.5f}"
              f"  {rep['item_ii']['rhs']:.5f}  {rep['item_v']['ratio']:.4f}")


if __name__ == "__main__":
    main()
