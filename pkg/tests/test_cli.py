"""CLI behavior: outputs, determinism, exit codes."""

import json

import pytest

from metarelay.cli import main


def run_cli(args, out_dir):
    return main([*args, "--out", str(out_dir)])


class TestLutCommand:
    def test_writes_deterministic_file(self, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        assert run_cli(["lut", "--mode", "lens"], first) == 0
        assert run_cli(["lut", "--mode", "lens"], second) == 0
        a = (first / "lut_lens.json").read_bytes()
        b = (second / "lut_lens.json").read_bytes()
        assert a == b

    def test_document_carries_meta(self, tmp_path):
        run_cli(["lut", "--mode", "mirror"], tmp_path)
        doc = json.loads((tmp_path / "lut_mirror.json").read_text())
        assert doc["kind"] == "phase-lookup-table"
        assert doc["config_hash"]
        assert doc["tool_version"]
        assert len(doc["entries"]) == 24


class TestConfigHandling:
    def test_missing_config_exits_2_with_path(self, tmp_path, capsys):
        code = run_cli(["lut", "--config", str(tmp_path / "nope.json")], tmp_path)
        assert code == 2
        assert "nope.json" in capsys.readouterr().err

    def test_malformed_config_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run_cli(["lut", "--config", str(bad)], tmp_path) == 2

    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["lut", "--frobnicate"])
        assert excinfo.value.code == 2

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["transmogrify"])
        assert excinfo.value.code == 2

    def test_domain_error_exits_1(self, tmp_path):
        code = run_cli(["lut", "--set", "cell.loss_factor=0.0"], tmp_path)
        assert code == 1

    def test_override_changes_output(self, tmp_path):
        base = tmp_path / "base"
        tweaked = tmp_path / "tweaked"
        run_cli(["lut"], base)
        run_cli(["lut", "--set", "cell.loss_factor=0.97"], tweaked)
        a = json.loads((base / "lut_lens.json").read_text())
        b = json.loads((tweaked / "lut_lens.json").read_text())
        assert a["config_hash"] != b["config_hash"]

    def test_config_file_merged(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"lut": {"phase_step_deg": 30.0}}))
        assert run_cli(["lut", "--config", str(cfg)], tmp_path) == 0
        doc = json.loads((tmp_path / "lut_lens.json").read_text())
        assert len(doc["entries"]) == 12


class TestPatternCommand:
    def test_csv_with_embedded_meta(self, tmp_path):
        code = run_cli(["pattern", "--set", "lut.voltage_step=1.0"], tmp_path)
        assert code == 0
        lines = (tmp_path / "pattern.csv").read_text().splitlines()
        assert lines[0].startswith("# tool_version=")
        assert lines[1].startswith("# config_hash=")
        assert lines[2] == "freq_hz,u_m,u_e,t_mag,t_phase_deg,g_mag,g_phase_deg"
        assert len(lines) == 3 + 11 * 11


class TestBeamCommand:
    def test_single_beam_outputs(self, tmp_path):
        code = run_cli(["beam", "--angle", "25", "--mode", "lens"], tmp_path)
        assert code == 0
        summary = json.loads((tmp_path / "beam_summary.json").read_text())
        assert abs(summary["peaks"][0]["angle_deg"] - 25.0) <= 3.0
        assert (tmp_path / "beam_pattern.csv").exists()

    def test_split_arms_parse(self, tmp_path):
        code = run_cli(["beam", "--arms=-30:1,30:1", "--mode", "mirror"], tmp_path)
        assert code == 0
        summary = json.loads((tmp_path / "beam_summary.json").read_text())
        assert len(summary["peaks"]) >= 2

    def test_bad_arm_spec_exits_2(self, tmp_path):
        assert run_cli(["beam", "--arms", "oops"], tmp_path) == 2

    def test_lut_file_roundtrip(self, tmp_path):
        run_cli(["lut", "--mode", "lens"], tmp_path)
        code = run_cli(
            ["beam", "--angle", "10", "--lut-file", str(tmp_path / "lut_lens.json")],
            tmp_path,
        )
        assert code == 0


class TestBudgetCommand:
    def test_report_files(self, tmp_path):
        code = run_cli(
            ["budget", "--tx", "0", "3", "0", "--rx", "0", "-3", "0"], tmp_path
        )
        assert code == 0
        doc = json.loads((tmp_path / "budget.json").read_text())
        assert doc["path_loss_db"] == pytest.approx(74.0, abs=0.2)
        assert (tmp_path / "budget.csv").exists()


class TestScenarioCommand:
    def test_coverage_outputs(self, tmp_path):
        code = run_cli(["scenario", "--operation", "coverage"], tmp_path)
        assert code == 0
        lines = (tmp_path / "coverage_map.csv").read_text().splitlines()
        assert len(lines) == 3 + 23
        summary = json.loads((tmp_path / "scenario_summary.json").read_text())
        assert len(summary["records"]) == 23

    def test_blockage_outputs(self, tmp_path):
        code = run_cli(
            ["scenario", "--operation", "blockage", "--trials", "200",
             "--betas", "0.0", "0.5", "1.0"],
            tmp_path,
        )
        assert code == 0
        doc = json.loads((tmp_path / "blockage.json").read_text())
        assert doc["trials"] == 200
        assert set(doc["configs"]) == {"0", "1", "2"}


class TestProtocolCommand:
    def test_result_file(self, tmp_path):
        code = run_cli(
            ["protocol", "--variant", "steady_state", "--beams", "8",
             "--ground-truth", "0", "15", "20", "--no-refine"],
            tmp_path,
        )
        assert code == 0
        doc = json.loads((tmp_path / "protocol_result.json").read_text())
        assert doc["coarse"]["probes_used"] == 64


class TestSelftestCommand:
    def test_subset_passes(self, tmp_path, capsys):
        code = run_cli(
            ["selftest", "--only", "energy_conservation", "golden_values"], tmp_path
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "PASS energy_conservation" in out
        assert "PASS golden_values" in out
        report = json.loads((tmp_path / "selftest.json").read_text())
        assert report["all_passed"]
