"""Command-line entry point.

    cloakverify run <config> [--out DIR] [--jobs N] [--strict]
    cloakverify converge <config> --param NAME --values v1,v2,...
    cloakverify list-scenarios

``<config>`` is a YAML path or the name of a bundled scenario.  Exit codes:
0 all checks passed, 2 checks ran and at least one failed (tables are still
written), 1 configuration or runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import CONVERGENCE_PARAMETERS, ConfigError, bundled_scenarios, load_config, resolve_config
from .export import ExportError, export, summary_text
from .runner import Check, ReportBundle, convergence_study, run_scenario

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2

log = logging.getLogger("cloakverify")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cloakverify", description="Mode-wise verification of singular cloaks")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and export its tables")
    r.add_argument("config", help="YAML config path or bundled scenario name")
    r.add_argument("--out", default=None, help="output directory (default: $CLOAKVERIFY_OUT or config)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for grid cells")
    r.add_argument("--strict", action="store_true", help="count isolated cell failures as failed checks")
    c = sub.add_parser("converge", help="convergence study over one parameter")
    c.add_argument("config")
    c.add_argument("--param", required=True, choices=CONVERGENCE_PARAMETERS)
    c.add_argument("--values", required=True, help="comma-separated sweep values (coarse to fine)")
    c.add_argument("--out", default=None)
    c.add_argument("--jobs", type=int, default=1)
    sub.add_parser("list-scenarios", help="list bundled canonical configs")
    return p


def _out_dir(arg, cfg):
    return arg if arg is not None else cfg.output.directory


def _report(bundle: ReportBundle, out, formats) -> int:
    paths = export(bundle, out, formats)
    sys.stdout.write(summary_text(bundle))
    sys.stdout.write(f"wrote {len(paths)} files to {paths[0].parent}\n")
    return EXIT_OK if bundle.passed else EXIT_FAILED


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-scenarios":
            for name, path in bundled_scenarios().items():
                cfg = load_config(path)
                print(f"{name}\t{cfg.description}")
            return EXIT_OK
        cfg = resolve_config(args.config)
        log.info("scenario %s (%s)", cfg.name, cfg.hash())
        if args.command == "run":
            bundle = run_scenario(cfg, jobs=args.jobs, strict=args.strict)
            return _report(bundle, _out_dir(args.out, cfg), cfg.output.formats)
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise ConfigError([("--values", "expected comma-separated numbers")]) from None
        if len(values) < 3:
            raise ConfigError([("--values", "need at least three sweep values")])
        if args.param == "l_max":
            values = [int(v) for v in values]
        curve = convergence_study(cfg, args.param, values, jobs=args.jobs)
        bundle = ReportBundle(cfg.name, convergence_curves=[curve],
                              provenance={"scenario": cfg.name, "config_hash": cfg.hash(), "parameter": args.param})
        bundle.checks.append(Check(f"convergence[{args.param}]: monotone", curve.monotone,
                                   float(len(curve.non_convergent)), 0.0))
        return _report(bundle, _out_dir(args.out, cfg), cfg.output.formats)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for path, msg in exc.errors:
            print(f"  {path or '<root>'}: {msg}", file=sys.stderr)
        return EXIT_ERROR
    except ExportError as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 1
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
