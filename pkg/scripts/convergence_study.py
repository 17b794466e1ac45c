#!/usr/bin/env python3
"""Numerical convergence of the E_K = 40 transit.

Prints the Strang self-convergence order and the change in the final
photon numbers when the Fock cutoff, the grid and the time step are refined.
"""

import argparse

from flyingatom.config import SimulationConfig, derive_parameters
from flyingatom.propagator import self_convergence
from flyingatom.runner import simulate

OBS = ["n_bare_c", "n_phys_c", "p_over_k0"]


def finals(cfg):
    r = simulate(cfg, OBS)
    return {k: r.final(k) for k in OBS}, r.diagnostics


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--e-k", type=float, default=40.0)
    args = ap.parse_args()
    base = SimulationConfig(e_k=args.e_k, n_outputs=10)

    conv = self_convergence(base.replace(n_x=1024, x_min=-9.0, x_max=9.0, n_phot=4, n_guard=6),
                            dt=0.0625, t_end=0.5)
    print("Strang: dt", conv["dt"], "diffs", conv["diffs"], "orders", conv["orders"])

    ref, diag = finals(base)
    print("reference", ref, diag)
    variants = {
        "n_phot=6": base.replace(n_phot=6),
        "n_phot=10": base.replace(n_phot=10),
        "n_guard=6": base.replace(n_guard=6),
        "n_x=4096": base.replace(n_x=4096),
        "dt/2": base.replace(dt=0.5 * derive_parameters(base).dt),
    }
    for name, cfg in variants.items():
        f, _ = finals(cfg)
        print(f"{name:10s} " + " ".join(f"{k}: {f[k]:.6e} (d={f[k] - ref[k]:+.1e})" for k in OBS))


if __name__ == "__main__":
    main()
