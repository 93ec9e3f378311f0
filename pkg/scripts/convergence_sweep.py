"""Seed-radius and integrator-tolerance sweeps for the Helmholtz single coating.

    python3 scripts/convergence_sweep.py [--scenario NAME]

Prints the worst DtN discrepancy per sweep value; both sweeps should decrease
until they reach the integrator's noise floor.
"""

import argparse

from cloakverify.harness.config import resolve_config
from cloakverify.harness.runner import convergence_study

SWEEPS = {
    "seed_radius": [1e-2, 1e-3, 1e-4, 1e-6, 1e-8],
    "integrator_tol": [1e-6, 1e-7, 1e-8, 1e-9, 1e-10],
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenario", default="criterion-9-identities")
    args = p.parse_args(argv)
    cfg = resolve_config(args.scenario)
    for param, values in SWEEPS.items():
        curve = convergence_study(cfg, param, values)
        print(f"{param}: {'monotone' if curve.monotone else 'NOT monotone'}")
        for v, d in zip(curve.values, curve.discrepancies):
            print(f"  {v:9.1e}  max discrepancy {d:.3e}")


if __name__ == "__main__":
    main()
