"""Run every bundled scenario and print a one-line verdict per scenario.

    python3 scripts/run_all_scenarios.py [--out DIR] [--jobs N]

Tables for each scenario are written to ``DIR/<scenario>/``.
"""

import argparse
import sys
import time
from pathlib import Path

from cloakverify.harness.config import bundled_scenarios, load_config
from cloakverify.harness.export import export
from cloakverify.harness.runner import run_scenario


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="cloakverify-out/all", help="parent output directory")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args(argv)
    ok = True
    for name, path in bundled_scenarios().items():
        t0 = time.perf_counter()
        bundle = run_scenario(load_config(path), jobs=args.jobs)
        export(bundle, Path(args.out) / name)
        ok &= bundle.passed
        n_pass = sum(c.passed for c in bundle.checks)
        print(f"{'PASS' if bundle.passed else 'FAIL'}  {name:34s} {n_pass}/{len(bundle.checks)} checks  "
              f"{time.perf_counter() - t0:6.1f} s", flush=True)
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
