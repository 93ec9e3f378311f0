"""Side-by-side |reflection| for the SHS-lined cylinder and the PEC control.

    python3 scripts/pec_vs_shs_table.py [--k 1.0] [--n-max 5]

Both columns come from the same radial pipeline; only the condition imposed at
the cloak surface differs.  The PEC control is dominated by n = 0, where the
collapsed cylinder still behaves like a thin conducting wire.
"""

import argparse

from cloakverify.cylinder import solve_cyl_mode
from cloakverify.geometry import CoatingSpec


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--n-max", type=int, default=5)
    args = p.parse_args(argv)
    spec = CoatingSpec(kind="single-cylinder-shs")
    print(f"{'n':>3} {'beta/k':>7} {'|R| shs':>12} {'|R| pec':>12}")
    for n in range(args.n_max + 1):
        for frac in (0.0, 0.3, 0.9):
            beta = frac * args.k
            shs = solve_cyl_mode(spec, n, beta, args.k, "shs").max_abs
            pec = solve_cyl_mode(spec, n, beta, args.k, "pec").max_abs
            print(f"{n:3d} {frac:7.1f} {shs:12.3e} {pec:12.3e}")


if __name__ == "__main__":
    main()
