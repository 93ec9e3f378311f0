"""Scenario configs, the runner, table export and the command-line interface."""

import json
import math
import os

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from cloakverify.geometry import CoatingSpec
from cloakverify.harness import cli
from cloakverify.harness.config import (
    ConfigError,
    ModeGrid,
    ScenarioConfig,
    Tolerances,
    bundled_scenarios,
    load_config,
    parse,
    resolve_config,
    serialize,
)
from cloakverify.harness.export import ENV_OUT, ExportError, export, summary_text, table_csv, table_schema
from cloakverify.harness.runner import ReportBundle, convergence_study, run_scenario

MINIMAL = resolve_config("minimal-helmholtz")
DTN_COLUMNS = ("l", "k", "lambda_cloaked_re", "lambda_cloaked_im", "lambda_ref_re", "lambda_ref_im",
               "rel_discrepancy")


@pytest.fixture(scope="module")
def minimal_bundle():
    return run_scenario(MINIMAL)


# --- configs -----------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(bundled_scenarios()))
def test_bundled_configs_round_trip(name):
    cfg = load_config(bundled_scenarios()[name])
    assert parse(serialize(cfg)) == cfg
    assert parse(serialize(cfg)).hash() == cfg.hash()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 12), st.lists(st.floats(0.1, 10.0), min_size=1, max_size=4),
       st.floats(1e-12, 1e-6), st.sampled_from(["single-ball", "double-ball"]))
def test_generated_configs_round_trip(l_max, ks, rtol, kind):
    cfg = ScenarioConfig(name="gen", spec=CoatingSpec(kind=kind), equation="helmholtz",
                         mode_grid=ModeGrid(l_max=l_max), k_grid=tuple(ks), tolerances=Tolerances(rtol=rtol))
    assert parse(serialize(cfg)) == cfg


def test_unknown_keys_rejected_with_paths():
    data = yaml.safe_load(serialize(MINIMAL))
    data["tolerances"] = dict(data.get("tolerances") or {}, rtoll=1e-9)
    data["bogus_section"] = 1
    with pytest.raises(ConfigError) as exc:
        parse(yaml.safe_dump(data))
    text = " ".join(f"{path} {msg}" for path, msg in exc.value.errors)
    assert "rtoll" in text and "bogus_section" in text


@pytest.mark.parametrize("change, path", [
    ({"k_grid": []}, "k_grid"),
    ({"k_grid": [-1.0]}, "k_grid"),
    ({"tolerances.rtol": -1e-8}, "tolerances.rtol"),
    ({"mode_grid.l_max": None}, "mode_grid.l_max"),
    ({"variants": ["shs"]}, "variants"),
    ({"diagnostics": ["nonsense"]}, "diagnostics"),
])
def test_invalid_values_rejected(change, path):
    with pytest.raises(ConfigError) as exc:
        MINIMAL.replace(**change)
    assert path in [p for p, _ in exc.value.errors]


def test_source_support_must_stay_inside_sigma():
    cfg = resolve_config("criterion-5-maxwell-single")
    with pytest.raises(ConfigError):
        cfg.replace(sources=[{"kind": "dipole", "location": [0.0, 0.0, 1.2]}])


# --- runner ------------------------------------------------------------------------


def test_minimal_run_gives_one_three_row_table(minimal_bundle):
    assert [t.name for t in minimal_bundle.tables] == ["dtn_virtual-surface"]
    t = minimal_bundle.tables[0]
    assert len(t.rows) == 3
    assert t.columns[: len(DTN_COLUMNS)] == DTN_COLUMNS
    assert t.column("l") == [0, 1, 2]
    assert set(t.column("status")) == {"ok"}
    assert minimal_bundle.passed
    assert minimal_bundle.provenance["config_hash"] == MINIMAL.hash()


def test_runs_are_deterministic(minimal_bundle):
    again = run_scenario(MINIMAL)
    assert [table_csv(t) for t in again.tables] == [table_csv(t) for t in minimal_bundle.tables]


def test_parallel_run_matches_serial(minimal_bundle):
    par = run_scenario(MINIMAL, jobs=2)
    assert [table_csv(t) for t in par.tables] == [table_csv(t) for t in minimal_bundle.tables]


def test_resonant_cell_is_isolated():
    # l = 0, k = pi/2 is a Dirichlet eigenvalue of the unit ball seen through the coating:
    # that cell gets a status while the neighbouring cells are untouched
    base = run_scenario(MINIMAL.replace(k_grid=[1.0, 2.0]))
    mixed = run_scenario(MINIMAL.replace(k_grid=[1.0, math.pi / 2, 2.0]))
    t_base, t_mixed = base.tables[0], mixed.tables[0]
    by_key = {(r[0], r[1]): r for r in t_mixed.rows}
    for row in t_base.rows:
        assert by_key[(row[0], row[1])] == row
    statuses = {(r[0], r[1]): r[-1] for r in t_mixed.rows}
    assert statuses[(0, math.pi / 2)] != "ok"
    assert all(s == "ok" for (l, k), s in statuses.items() if k != math.pi / 2)


def test_strict_mode_counts_failed_cells():
    bundle = run_scenario(MINIMAL.replace(k_grid=[1.0, math.pi / 2]), strict=True)
    names = [c.name for c in bundle.checks]
    assert "strict: no failed cells" in names


def test_verdict_bundle_has_one_record_per_source():
    cfg = resolve_config("criterion-5-maxwell-single").replace(
        sources=[{"kind": "random-dipoles", "count": 3, "seed": 1, "radius": 0.8, "expect": "no-finite-energy"},
                 {"kind": "zero", "expect": "exists"}])
    bundle = run_scenario(cfg)
    assert len(bundle.verdicts) == 4
    assert [v["exists_finite_energy"] for v in bundle.verdicts] == [False, False, False, True]
    assert bundle.passed


def test_convergence_seed_radius_monotone():
    curve = convergence_study(MINIMAL, "seed_radius", [1e-4, 1e-6, 1e-8])
    assert curve.monotone and curve.non_convergent == []
    assert len(curve.discrepancies) == 3


def test_convergence_lmax_shares_rows():
    curve = convergence_study(MINIMAL, "l_max", [1, 2, 3])
    assert curve.monotone
    # rows for l = 0, 1 exist at every l_max and agree exactly
    assert len(curve.cells) == 2
    for seq in curve.cells.values():
        assert max(seq) - min(seq) <= 1e-12


def test_convergence_needs_three_values():
    with pytest.raises(ValueError):
        convergence_study(MINIMAL, "seed_radius", [1e-6, 1e-8])
    with pytest.raises(ValueError):
        convergence_study(MINIMAL, "mesh", [1, 2, 3])


# --- export ------------------------------------------------------------------------


def test_empty_bundle_summary():
    text = summary_text(ReportBundle("empty"))
    assert "tables: 0" in text


def test_empty_bundle_export(tmp_path):
    paths = export(ReportBundle("empty"), tmp_path)
    assert {p.name for p in paths} >= {"summary.txt", "checks.json"}
    assert "tables: 0" in (tmp_path / "summary.txt").read_text()


def test_dtn_csv_and_schema(minimal_bundle, tmp_path):
    export(minimal_bundle, tmp_path, ("csv", "json"))
    header, *rows = (tmp_path / "dtn_virtual-surface.csv").read_text().splitlines()
    assert tuple(header.split(",")[: len(DTN_COLUMNS)]) == DTN_COLUMNS
    assert len(rows) == 3
    schema = json.loads((tmp_path / "dtn_virtual-surface.schema.json").read_text())
    assert [c["name"] for c in schema["columns"]][: len(DTN_COLUMNS)] == list(DTN_COLUMNS)
    assert all(c["description"] for c in schema["columns"][: len(DTN_COLUMNS)])
    recs = json.loads((tmp_path / "dtn_virtual-surface.json").read_text())
    assert len(recs) == 3 and recs[0]["l"] == 0
    assert table_schema(minimal_bundle.tables[0])["table"] == "dtn_virtual-surface"


def test_export_is_byte_identical(minimal_bundle, tmp_path):
    export(minimal_bundle, tmp_path / "a")
    export(run_scenario(MINIMAL), tmp_path / "b")
    for name in ("dtn_virtual-surface.csv", "dtn_virtual-surface.schema.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unwritable_output_raises(minimal_bundle, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ExportError):
        export(minimal_bundle, blocker / "sub")


# --- command line ------------------------------------------------------------------


def test_cli_run_ok(tmp_path, capsys):
    assert cli.main(["run", "minimal-helmholtz", "--out", str(tmp_path)]) == cli.EXIT_OK
    assert (tmp_path / "dtn_virtual-surface.csv").exists()
    assert "checks:" in capsys.readouterr().out


def test_cli_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUT, str(tmp_path / "env"))
    assert cli.main(["run", "minimal-helmholtz"]) == cli.EXIT_OK
    assert (tmp_path / "env" / "summary.txt").exists()


def test_cli_failed_check_exit_code(tmp_path):
    cfg = MINIMAL.replace(**{"tolerances.acceptance": 1e-300})
    path = tmp_path / "impossible.yaml"
    path.write_text(serialize(cfg))
    assert cli.main(["run", str(path), "--out", str(tmp_path / "out")]) == cli.EXIT_FAILED
    # tables are still written
    assert (tmp_path / "out" / "dtn_virtual-surface.csv").exists()


def test_cli_config_errors(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == cli.EXIT_ERROR
    bad = tmp_path / "bad.yaml"
    bad.write_text(serialize(MINIMAL) + "\nunknown_key: 3\n")
    assert cli.main(["run", str(bad), "--out", str(tmp_path)]) == cli.EXIT_ERROR
    assert "unknown_key" in capsys.readouterr().err


def test_cli_converge(tmp_path):
    out = str(tmp_path)
    assert cli.main(["converge", "minimal-helmholtz", "--param", "seed_radius",
                     "--values", "1e-4,1e-6,1e-8", "--out", out]) == cli.EXIT_OK
    assert (tmp_path / "convergence_seed_radius.csv").exists()
    assert cli.main(["converge", "minimal-helmholtz", "--param", "seed_radius",
                     "--values", "1e-6,1e-8", "--out", out]) == cli.EXIT_ERROR


def test_cli_list_scenarios(capsys):
    assert cli.main(["list-scenarios"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    for i in range(1, 10):
        assert f"criterion-{i}-" in out
    assert "minimal-helmholtz" in out


def test_default_output_dir_respects_env(monkeypatch, tmp_path):
    from cloakverify.harness.export import default_output_dir

    monkeypatch.setenv(ENV_OUT, str(tmp_path))
    assert default_output_dir() == tmp_path
    monkeypatch.delenv(ENV_OUT)
    assert default_output_dir().name == "cloakverify-out"
    assert os.fspath(default_output_dir())
