import json

import pytest

from sco_lab.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGeometry:
    def test_count_example(self, capsys):
        code, out, _ = run_cli(capsys, "geometry", "count", "--d", "2", "--R", "2")
        assert code == 0
        assert out.strip() == "13"

    def test_enumerate_stdout(self, capsys):
        code, out, _ = run_cli(capsys, "geometry", "enumerate", "--d", "2",
                               "--R", "1")
        assert code == 0
        assert out.splitlines() == ["-1,0", "0,-1", "0,0", "0,1", "1,0"]

    def test_enumerate_to_file(self, tmp_path, capsys):
        out_dir = tmp_path / "geo"
        code, _, _ = run_cli(capsys, "geometry", "enumerate", "--d", "2",
                             "--R", "1", "--out", str(out_dir))
        assert code == 0
        lines = (out_dir / "points.csv").read_text().splitlines()
        assert lines[0] == "x1,x2"
        assert len(lines) == 6
        assert (out_dir / "manifest.json").exists()

    def test_packing_file_has_json_header(self, tmp_path, capsys):
        out_dir = tmp_path / "pack"
        code, _, _ = run_cli(capsys, "geometry", "packing", "--d", "8", "--R", "3",
                             "--target-size", "8", "--seed", "0",
                             "--out", str(out_dir))
        assert code == 0
        lines = (out_dir / "packing.csv").read_text().splitlines()
        header = json.loads(lines[0])
        assert header["d"] == 8 and header["size"] == 8 and header["seed"] == 0
        assert len(lines) == 9

    def test_budget_error_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "geometry", "count", "--d", "100000000",
                               "--R", "100")
        assert code == 2
        assert "budget" in err


class TestBounds:
    def test_json_output(self, capsys):
        code, out, _ = run_cli(capsys, "bounds", "--d", "4", "--R", "2",
                               "--eps", "0.1", "--delta", "0.25")
        assert code == 0
        payload = json.loads(out)
        assert payload["linf_lower_bounds"]["combined"] == pytest.approx(2.104,
                                                                         abs=5e-4)

    def test_sc_rates_with_parameters(self, capsys):
        code, out, _ = run_cli(capsys, "bounds", "--d", "2", "--R", "1",
                               "--eps", "0.1", "--delta", "0.36787944117144233",
                               "--mu", "1", "--L", "1", "--sigma", "1")
        payload = json.loads(out)
        assert payload["sc_rates"]["erm_rate"] == pytest.approx(600.0, rel=1e-6)

    def test_infinite_radius(self, capsys):
        code, out, _ = run_cli(capsys, "bounds", "--d", "2", "--R", "inf",
                               "--eps", "0.1", "--delta", "0.25",
                               "--mu", "1", "--L", "4", "--sigma", "1")
        assert code == 0
        payload = json.loads(out)
        assert payload["sc_rates"]["auc_rate"] is None or \
            payload["sc_rates"]["auc_rate"] == float("inf")


class TestVerify:
    def test_gadget_suite_passes(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "--suite", "gadget")
        assert code == 0
        assert "verification: PASS" in out

    def test_solver_suite_passes(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "--suite", "solvers",
                               "--trials", "20")
        assert code == 0


class TestUsageErrors:
    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as e:
            main(["geometry", "count", "--d", "2", "--R", "2", "--bogus", "1"])
        assert e.value.code == 2

    def test_missing_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as e:
            main([])
        assert e.value.code == 2

    def test_simulate_missing_keys_exits_2(self, capsys):
        code, _, err = run_cli(capsys, "simulate")
        assert code == 2
        assert "missing configuration" in err


class TestSimulate:
    def test_flags_only_run(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "simulate", "--family", "coin",
                               "--rule", "majority", "--d", "2", "--R", "1",
                               "--eps", "0.25", "--delta", "0.25",
                               "--m-grid", "1,16,128", "--trials", "50",
                               "--seed", "3", "--out", str(tmp_path))
        assert code == 0
        run_dir = tmp_path / "coin-majority-eps0.25"
        assert (run_dir / "trials.csv").exists()
        assert (run_dir / "summary.json").exists()
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["config"]["master_seed"] == 3

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = {
            "experiment_id": "from-file",
            "family": {"kind": "coin_linear", "d": 2, "R": 1.0, "rho": 0.5,
                       "mode": "dimension"},
            "feasible": {"kind": "box_continuous", "radius": 1.0},
            "rule": "erm", "epsilon": 0.25, "delta": 0.25,
            "m_grid": [1, 8], "trials": 20, "master_seed": 1,
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        code, _, _ = run_cli(capsys, "simulate", "--config", str(path),
                             "--trials", "30", "--out", str(tmp_path / "o"))
        assert code == 0
        manifest = json.loads(
            (tmp_path / "o" / "from-file" / "manifest.json").read_text())
        assert manifest["config"]["trials"] == 30  # flag overrode the file
        assert manifest["config"]["master_seed"] == 1

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        argv = ["simulate", "--family", "coin", "--rule", "erm", "--d", "2",
                "--R", "1", "--eps", "0.25", "--delta", "0.25",
                "--m-grid", "1,8", "--trials", "25", "--seed", "9"]
        run_cli(capsys, *argv, "--out", str(tmp_path / "a"))
        run_cli(capsys, *argv, "--out", str(tmp_path / "b"))
        name = "coin-erm-eps0.25"
        for f in ("trials.csv", "summary.json"):
            assert (tmp_path / "a" / name / f).read_bytes() == \
                (tmp_path / "b" / name / f).read_bytes()


class TestRatefit:
    def test_fit_from_summaries(self, tmp_path, capsys):
        for i, (eps, m_hat) in enumerate([(0.4, 625), (0.2, 2500), (0.1, 10000)]):
            (tmp_path / f"s{i}.json").write_text(
                json.dumps({"epsilon": eps, "m_hat": m_hat}))
        code, out, _ = run_cli(capsys, "ratefit", "--in",
                               str(tmp_path / "s0.json"), str(tmp_path / "s1.json"),
                               str(tmp_path / "s2.json"),
                               "--out", str(tmp_path / "fit"))
        assert code == 0
        payload = json.loads((tmp_path / "fit" / "ratefit.json").read_text())
        assert payload["slope"] == pytest.approx(2.0, abs=1e-9)

    def test_missing_m_hat_fails(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"epsilon": 0.1, "m_hat": None}))
        code, _, err = run_cli(capsys, "ratefit", "--in", str(p))
        assert code == 1
        assert "m_hat" in err
