"""Time-convergence order of both schemes against a matrix-exponential reference (linear regime)."""

import argparse
import math

import numpy as np
import scipy.linalg as sla

from kvlab.decay import DecayParameters
from kvlab.discretization import FlowParameters, GridSpec, convection_matrix, operators, reaction_matrix
from kvlab.evolution import SCHEMES, EvolutionConfig, run
from kvlab.forcing import ForcingProfile
from kvlab.shapes import random_smooth, steady_forcing
from kvlab.spectral import compute_constants, dense_divfree_basis
from kvlab.steady import SteadyProblem, solve_steady


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=8)
    ap.add_argument("--kappa", type=float, default=0.1)
    ap.add_argument("--horizon", type=float, default=1.0)
    ap.add_argument("--dts", default="0.1,0.05,0.025,0.0125,0.00625,0.003125")
    args = ap.parse_args()
    g, k, T = GridSpec(args.grid), args.kappa, args.horizon
    st = solve_steady(SteadyProblem(FlowParameters(1.0, k), steady_forcing("vortex", g, 5.0, 1.0)))
    sc = compute_constants(st.u_inf, 1.0, k, 200)
    dp = DecayParameters.from_constants(sc, k)
    z0 = random_smooth(g, 1) * 1e-3
    Q = dense_divfree_basis(g)
    L = operators(g).lap.toarray()
    lin = (convection_matrix(st.u_inf) + reaction_matrix(st.u_inf)).toarray()
    M = Q.T @ (np.eye(g.n_vel) - k * L) @ Q
    K = Q.T @ (-L + lin) @ Q
    zT = Q @ (sla.expm(-np.linalg.solve(M, K) * T) @ (Q.T @ z0.to_vector()))
    for scheme in SCHEMES:
        prev = None
        print(scheme)
        for dt in (float(x) for x in args.dts.split(",")):
            cfg = EvolutionConfig(FlowParameters(1.0, k), st, ForcingProfile.zero(g), z0, dt, T, dp, sc,
                                  scheme=scheme, linear=True)
            err = g.h * np.linalg.norm(run(cfg).final.z.to_vector() - zT)
            order = f"{math.log2(prev / err):.3f}" if prev else "-"
            print(f"  dt={dt:<10g} error={err:.4e} order={order}")
            prev = err


if __name__ == "__main__":
    main()
