import json
import math
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polariton_bloch import cli
from polariton_bloch.config import ConfigError, format_config, parse_config
from polariton_bloch.output import OutputError, Table, emit_outputs, to_json
from polariton_bloch.scenarios import compute_scenario, prepare


def test_empty_config_with_scenario_is_preset():
    cfg = parse_config("", scenario="validity-check")
    assert cfg.scenario == "validity-check"
    assert cfg["lattice.V0"] == 79.15
    assert cfg["lattice.d"] == 8e-6
    assert cfg.explicit == frozenset()


def test_missing_scenario_rejected():
    with pytest.raises(ConfigError, match="no scenario"):
        parse_config("")


def test_negative_v0_rejected_with_line():
    text = "[simulation]\nscenario = band-structure\n\n[lattice]\nV0 = -1 kHz\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == 5
    assert info.value.key == "lattice.V0"
    assert "line 5" in str(info.value)


def test_unknown_key_and_section_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config("[lattice]\nd = 8 um\nV1 = 3\n", scenario="band-structure")
    assert info.value.line == 3 and info.value.key == "lattice.V1"
    with pytest.raises(ConfigError) as info:
        parse_config("[latice]\nd = 1\n", scenario="band-structure")
    assert info.value.line == 1


@pytest.mark.parametrize(
    "text, line",
    [
        ("d = 1\n", 1),
        ("[lattice]\nd = 1\nd = 2\n", 3),
        ("[lattice]\n!!!\n", 2),
        ("[lattice]\nd = eight\n", 2),
        ("[lattice]\nd = 8 furlongs\n", 2),
        ("[simulation]\nn_sites = 400\n", 2),
        ("[output]\nformat = xml\n", 2),
    ],
)
def test_line_anchored_errors(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text, scenario="band-structure")
    assert info.value.line == line


def test_units_and_sigma_ratio_recorded():
    cfg = parse_config("[simulation]\nsigma = 0.1 mm\n", scenario="validity-check")
    assert cfg["simulation.sigma"] == pytest.approx(1e-4)
    summary, _ = compute_scenario(cfg)
    assert summary.derived["sigma_over_d"] == pytest.approx(12.5)


def test_coupling_route_exclusive():
    with pytest.raises(ConfigError):
        parse_config("[fields]\nm_eff = 1e5\ngsqrtN = 1e6\nOmega = 1e6\n", scenario="validity-check")
    with pytest.raises(ConfigError):
        parse_config("[fields]\ngsqrtN = 1e6\n", scenario="validity-check")
    cfg = parse_config("[fields]\ngsqrtN = 1e6\nOmega = 2e6\n", scenario="validity-check")
    assert cfg["fields.m_eff"] is None
    assert cfg.fields().Omega == 2e6


sweepable = st.fixed_dictionaries({
    "lattice.barrier_fraction": st.floats(min_value=0.05, max_value=0.95),
    "lattice.V0": st.floats(min_value=1.0, max_value=500.0),
    "simulation.sigma": st.floats(min_value=1e-5, max_value=1e-3),
    "simulation.periods": st.floats(min_value=0.1, max_value=4.0),
    "simulation.samples_per_period": st.integers(8, 1024),
    "simulation.continuum": st.booleans(),
    "lattice.frequency_convention": st.sampled_from(["ordinary", "angular"]),
})


@settings(max_examples=40)
@given(sweepable)
def test_roundtrip_idempotent(overrides):
    sections = {"simulation": ["scenario = figure3"]}
    for k, v in overrides.items():
        section, name = k.split(".")
        sections.setdefault(section, []).append(f"{name} = {str(v).lower() if isinstance(v, bool) else v}")
    text = "\n".join(f"[{sec}]\n" + "\n".join(lines) for sec, lines in sections.items())
    first = parse_config(text)
    second = parse_config(format_config(first))
    assert second == first
    assert format_config(second) == format_config(first)


def test_summary_values_recomputable():
    cfg = parse_config("", scenario="validity-check")
    summary, _ = compute_scenario(cfg)
    s = prepare(cfg)
    d = summary.derived
    assert d["T_B"] == s.params.T_B
    assert d["omega_B"] * d["T_B"] == pytest.approx(2 * math.pi, rel=1e-12)
    for key in ("omega_B", "T_B", "A", "zeta", "validity_ratio"):
        assert key in d


def test_json_floats_have_17_digits():
    text = to_json({"x": 0.1, "nan": math.nan, "flag": True, "n": 3})
    data = json.loads(text)
    assert data == {"x": 0.1, "nan": None, "flag": True, "n": 3}
    assert "0.10000000000000001" in text


def test_grid_table_row_count_and_order():
    t = Table.from_grid([0.0, 1.0, 2.0], [0.0, 0.5], [[1, 2, 3], [4, 5, 6]])
    assert t.n_rows == 6
    assert list(t.data[1]) == [0.0, 0.0, 0.0, 0.5, 0.5, 0.5]
    assert list(t.data[2]) == [1, 2, 3, 4, 5, 6]


def test_partial_outputs_removed(tmp_path):
    (tmp_path / "summary.json").mkdir()
    tables = {"a": Table(["x"], [[1.0]]), "b": Table(["y"], [[2.0]])}
    with pytest.raises(OutputError) as info:
        emit_outputs(tables, {"k": 1}, "csv", tmp_path)
    assert info.value.path == tmp_path / "summary.json"
    assert not (tmp_path / "a.csv").exists() and not (tmp_path / "b.csv").exists()


def run_cli(args, capsys):
    code = cli.main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_success_and_outputs(tmp_path, capsys):
    code, out, _ = run_cli(["--scenario", "wannier-stark", "--out-dir", tmp_path, "--format", "both"], capsys)
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["ladder.csv", "ladder.json", "states.csv", "states.json", "summary.json"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] and summary["provenance"]["input_sha256"]


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[lattice]\nV0 = -1\n")
    code, _, err = run_cli(["--config", cfg, "--scenario", "band-structure", "--out-dir", tmp_path / "o"], capsys)
    assert code == 2
    assert "line 2" in err and "lattice.V0" in err
    assert not (tmp_path / "o").exists()


def test_cli_check_failure_lists_failures(tmp_path, capsys):
    cfg = tmp_path / "strict.ini"
    cfg.write_text("[simulation]\nvalidity_threshold = 1e-6\n")
    code, out, _ = run_cli(["--config", cfg, "--scenario", "validity-check", "--out-dir", tmp_path / "o"], capsys)
    assert code == 3
    report = json.loads(out)
    assert report["exit_code"] == 3
    assert report["runs"][0]["failures"][0]["name"] == "single_band_validity"


def test_cli_engine_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "small.ini"
    cfg.write_text("[simulation]\nn_sites = 101\n")
    code, out, _ = run_cli(["--config", cfg, "--scenario", "figure3", "--out-dir", tmp_path / "o"], capsys)
    assert code == 3
    assert "LatticeTruncationError" in json.loads(out)["runs"][0]["error"]
    assert not (tmp_path / "o").exists()


def test_cli_io_error_exit_code(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, _ = run_cli(["--scenario", "validity-check", "--out-dir", blocker / "sub"], capsys)
    assert code == 4
    code, _, _ = run_cli(["--config", tmp_path / "missing.ini", "--scenario", "validity-check"], capsys)
    assert code == 4


def test_output_directory_precedence(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "from_env"))
    assert run_cli(["--scenario", "validity-check"], capsys)[0] == 0
    assert (tmp_path / "from_env" / "summary.json").exists()
    cfg = tmp_path / "c.ini"
    cfg.write_text(f"[output]\ndirectory = {tmp_path / 'from_config'}\n")
    assert run_cli(["--config", cfg, "--scenario", "validity-check"], capsys)[0] == 0
    assert (tmp_path / "from_config" / "summary.json").exists()
    assert run_cli(["--config", cfg, "--scenario", "validity-check", "--out-dir", tmp_path / "flag"], capsys)[0] == 0
    assert (tmp_path / "flag" / "summary.json").exists()
    monkeypatch.delenv(cli.ENV_OUT)
    assert run_cli(["--scenario", "validity-check"], capsys)[0] == 0
    assert (tmp_path / cli.DEFAULT_OUT / "summary.json").exists()


def test_sweep_writes_subdirectories(tmp_path, capsys):
    code, out, _ = run_cli(["--scenario", "validity-check", "--out-dir", tmp_path,
                            "--sweep", "simulation.sigma=0.05 mm:0.15 mm:3", "--workers", "2"], capsys)
    assert code == 0
    dirs = sorted(p.name for p in tmp_path.iterdir())
    assert dirs == ["simulation_sigma_000", "simulation_sigma_001", "simulation_sigma_002"]
    ratios = [json.loads((tmp_path / d / "summary.json").read_text())["derived"]["sigma_over_d"] for d in dirs]
    assert ratios == pytest.approx([6.25, 12.5, 18.75])


@pytest.mark.parametrize("bad", ["simulation.sigma", "nokey=1:2:3", "simulation.sigma=1:2:x",
                                 "simulation.continuum=0:1:2"])
def test_sweep_syntax_errors(bad, tmp_path, capsys):
    code, _, _ = run_cli(["--scenario", "validity-check", "--out-dir", tmp_path, "--sweep", bad], capsys)
    assert code == 2


def test_determinism_figure3(tmp_path, capsys):
    cfg = tmp_path / "short.ini"
    cfg.write_text("[simulation]\nperiods = 1.25\nsamples_per_period = 32\n")
    for name in ("a", "b"):
        assert run_cli(["--config", cfg, "--scenario", "figure3", "--out-dir", tmp_path / name], capsys)[0] == 0
    for f in ("grid_psi2.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "polariton_bloch", "--help"], capture_output=True, text=True,
                         env=dict(os.environ))
    assert res.returncode == 0 and "--sweep" in res.stdout
