"""Flat-file export of report bundles.

Tables are comma-separated with a header row plus a ``.schema.json`` sidecar;
complex numbers are already split into re/im columns.  Floats are written with
``repr`` so identical bundles produce byte-identical tables; wall-clock data
lives only in ``provenance.json``.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

from .runner import ReportBundle, Table

ENV_OUT = "CLOAKVERIFY_OUT"
DEFAULT_OUT = "cloakverify-out"

COLUMN_DOCS = {
    "l": "spherical mode order",
    "k": "wavenumber (1/length)",
    "n": "cylindrical angular order",
    "beta": "axial wavenumber (1/length)",
    "pol": "polarization channel",
    "lambda_cloaked_re": "Re of the cloaked DtN eigenvalue at the outer boundary",
    "lambda_cloaked_im": "Im of the cloaked DtN eigenvalue at the outer boundary",
    "lambda_ref_re": "Re of the homogeneous reference DtN eigenvalue",
    "lambda_ref_im": "Im of the homogeneous reference DtN eigenvalue",
    "rel_discrepancy": "|cloaked - reference| / |reference|",
    "rtol": "integrator relative tolerance",
    "seed_radius": "distance to Sigma of the near-surface seed",
    "status": "ok, a resonance flag, or the error that isolated this cell",
    "max_abs": "largest |reflection| over channel pairs",
    "unitarity_defect": "max |S^H S - I| with S = I + 2R (propagating modes)",
    "residual": "integral-form ODE residual",
    "flux_ratio": "|metric flux| at distance 1e-6 from Sigma over its max",
}


class ExportError(OSError):
    """Output could not be written; the message names the path."""


def default_output_dir() -> Path:
    return Path(os.environ.get(ENV_OUT) or DEFAULT_OUT)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):  # numpy scalar
        return _fmt(v.item())
    return str(v)


def _kind(values) -> str:
    vals = [v.item() if hasattr(v, "item") else v for v in values]
    if all(isinstance(v, bool) for v in vals):
        return "boolean"
    if all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
        return "integer"
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
        return "number"
    return "string"


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def table_schema(table: Table) -> dict:
    cols = []
    for i, c in enumerate(table.columns):
        col = [row[i] for row in table.rows]
        cols.append({"name": c, "type": _kind(col) if col else "string",
                     "description": table.descriptions.get(c, COLUMN_DOCS.get(c, ""))})
    return {"table": table.name, "format": "csv", "delimiter": ",", "header": True, "columns": cols}


def _verdict_table(bundle: ReportBundle) -> Table:
    cols = ("source", "member", "kind", "k", "expect", "exists_finite_energy", "offending_modes",
            "multipole_norm", "trace_norm", "status")
    rows = [tuple(r.get(c, "") for c in cols) for r in bundle.verdicts]
    return Table("verdicts", cols, rows, {"offending_modes": "l/m/pol of radiating modes, ';'-separated",
                                           "multipole_norm": "largest outgoing amplitude / (k^2 |J|)",
                                           "trace_norm": "same, from Cauchy traces on Sigma"})


def _convergence_tables(bundle: ReportBundle) -> list[Table]:
    out = []
    for c in bundle.convergence_curves:
        cols = ("cell",) + tuple(f"{c.parameter}={v!r}" for v in c.values) + ("convergent",)
        rows = [(name,) + tuple(seq) + (name not in c.non_convergent,) for name, seq in c.cells.items()]
        out.append(Table(f"convergence_{c.parameter}", cols, rows))
    return out


def summary_text(bundle: ReportBundle) -> str:
    lines = [f"scenario: {bundle.scenario}", f"tables: {len(bundle.tables)}"]
    for t in bundle.tables:
        lines.append(f"  {t.name}: {len(t.rows)} rows")
    if bundle.verdicts:
        lines.append(f"verdict records: {len(bundle.verdicts)}")
    for c in bundle.convergence_curves:
        lines.append(f"convergence[{c.parameter}]: {'monotone' if c.monotone else 'NOT monotone'} "
                     f"({len(c.non_convergent)} flagged cells)")
    lines.append(f"failed cells: {len(bundle.failures)}")
    for name, cell, msg in bundle.failures:
        lines.append(f"  {name} {cell}: {msg}")
    lines.append(f"checks: {sum(c.passed for c in bundle.checks)}/{len(bundle.checks)} passed")
    for c in bundle.checks:
        lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.value:.3e} (threshold {c.threshold:.3e})"
                     + (f" - {c.detail}" if c.detail else ""))
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror}") from None


def export(bundle: ReportBundle, out_dir=None, formats=("csv",)) -> list[Path]:
    """Write every table (+ schema sidecar), the summary and the provenance block."""
    out = Path(out_dir) if out_dir is not None else default_output_dir()
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {out}: {exc.strerror}") from None
    tables = list(bundle.tables)
    if bundle.verdicts:
        tables.append(_verdict_table(bundle))
    tables += _convergence_tables(bundle)
    written = []
    for t in tables:
        if "csv" in formats:
            p = out / f"{t.name}.csv"
            _write(p, table_csv(t))
            s = out / f"{t.name}.schema.json"
            _write(s, json.dumps(table_schema(t), indent=2, sort_keys=True) + "\n")
            written += [p, s]
        if "json" in formats:
            p = out / f"{t.name}.json"
            recs = [{c: (v.item() if hasattr(v, "item") else v) for c, v in zip(t.columns, row)} for row in t.rows]
            _write(p, json.dumps(recs, indent=1, sort_keys=True, allow_nan=True) + "\n")
            written.append(p)
    p = out / "summary.txt"
    _write(p, summary_text(bundle))
    written.append(p)
    checks = [{"name": c.name, "passed": c.passed, "value": c.value, "threshold": c.threshold, "detail": c.detail}
              for c in bundle.checks]
    p = out / "checks.json"
    _write(p, json.dumps(checks, indent=2, sort_keys=True) + "\n")
    written.append(p)
    p = out / "provenance.json"
    _write(p, json.dumps(bundle.provenance, indent=2, sort_keys=True) + "\n")
    written.append(p)
    return written
