#!/usr/bin/env python3
"""Perturbative photon number against two independent references.

For each E_K: the closed-form first-order value, the exact constant-velocity
Rabi transit (full coupling, Gaussian pulse in time) and optionally the full
wavepacket simulation.  Also prints the closed-form vs quadrature check for
both signs of the cubic term.
"""

import argparse

from flyingatom.config import DEFAULT_K0
from flyingatom.perturbation import constant_velocity_photon_number, oracle_grid, perturbative_photon_number

ETA0 = 0.3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--e-k", default="5,10,15,20,30,40,60,100", help="comma-separated E_K values")
    ap.add_argument("--full", action="store_true", help="also run the wavepacket simulation (slow)")
    args = ap.parse_args()

    for sign in (-1.0, 1.0):
        worst = max(r["rel_err"] for r in oracle_grid(cubic_sign=sign))
        print(f"cubic sign {sign:+.0f}: closed form vs quadrature, max relative error {worst:.2e}")

    if args.full:
        from flyingatom.config import SimulationConfig
        from flyingatom.runner import simulate

    print(f"{'E_K':>6} {'xi':>8} {'perturbative':>13} {'const-vel':>11}" + (f" {'full':>11}" if args.full else ""))
    for e_k in (float(v) for v in args.e_k.split(",")):
        xi = 2 * e_k / DEFAULT_K0
        line = f"{e_k:6g} {xi:8.4f} {perturbative_photon_number(ETA0, xi):13.4e} " \
               f"{constant_velocity_photon_number(ETA0, xi):11.4e}"
        if args.full:
            line += f" {simulate(SimulationConfig(e_k=e_k, n_outputs=10), ['n_bare_c']).final('n_bare_c'):11.4e}"
        print(line)


if __name__ == "__main__":
    main()
