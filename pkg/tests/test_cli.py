import json

import pytest

from rolecomms.cli import build_parser, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def system_file(config_dir):
    return str(config_dir / "unstable_system.json")


class TestAnalyze:
    def test_stability_reports_unstable(self, capsys, system_file):
        code, out, _ = run_cli(capsys, "analyze", "--system", system_file, "--mode", "stability")
        assert code == 0
        doc = json.loads(out)
        assert doc["stable"] is False
        assert doc["max_real_part"] == pytest.approx(1.0)

    def test_stability_other_allocations(self, capsys, system_file):
        for alloc in ("speaker_listener_2", "speaker_speaker", "dynamic"):
            code, out, _ = run_cli(
                capsys, "analyze", "--system", system_file, "--mode", "stability",
                "--alloc", alloc,
            )
            assert code == 0
            assert json.loads(out)["allocation"] == alloc

    def test_variances_unit_example(self, capsys, tmp_path):
        system = {
            "A": [[0.0, 0.0], [0.0, 0.0]],
            "B": [[1.0, 0.0], [0.0, 1.0]],
            "Kstar": [[1.0, 0.0], [1.0, 1.0]],
            "W": [1.0, 1.0],
        }
        path = tmp_path / "system.json"
        path.write_text(json.dumps(system))
        code, out, _ = run_cli(capsys, "analyze", "--system", str(path), "--mode", "variances")
        assert code == 0
        doc = json.loads(out)
        assert doc["sigma1_sq"] == pytest.approx(0.5)
        assert doc["sigma2_sq"] == pytest.approx(1.0)

    def test_rotation_constant_state_all_zero(self, capsys, system_file):
        code, out, _ = run_cli(
            capsys, "analyze", "--system", system_file, "--mode", "rotation",
            "--drift", "0", "0",
        )
        assert code == 0
        doc = json.loads(out)
        assert all(row["sup_deviation"] == 0.0 for row in doc["rows"])

    def test_kl_mode(self, capsys, system_file):
        code, out, _ = run_cli(capsys, "analyze", "--system", system_file, "--mode", "kl")
        assert code == 0
        assert json.loads(out)["expected_kl"] > 0

    def test_malformed_system_exits_2(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, out, err = run_cli(capsys, "analyze", "--system", str(bad), "--mode", "stability")
        assert code == 2
        assert "error" in err

    def test_missing_system_file_exits_2(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "analyze", "--system", str(tmp_path / "nope.json"), "--mode", "stability"
        )
        assert code == 2
        assert "not found" in err

    def test_unknown_system_key_exits_2(self, capsys, tmp_path):
        path = tmp_path / "system.json"
        path.write_text(json.dumps({"A": [[0]], "B": [[1]], "Kstar": [[1]], "bogus": 3}))
        code, _, err = run_cli(capsys, "analyze", "--system", str(path), "--mode", "stability")
        assert code == 2
        assert "bogus" in err


class TestSimulate:
    def test_empty_env_goes_straight(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--seed", "3", "--n", "0", "--strategy", "explicit", "--T", "0"
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["success"] is True
        assert doc["seed"] == 3

    def test_fig2_scenario(self, capsys, config_dir, tmp_path):
        traj = tmp_path / "traj.csv"
        code, out, _ = run_cli(
            capsys, "simulate", "--env", str(config_dir / "fig2_env.json"),
            "--strategy", "dynamic", "--T", "1", "--seed", "0",
            "--trajectory-out", str(traj),
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["success"] is True
        header = traj.read_text().splitlines()[0]
        assert header.startswith("step,cx,cy,theta,v1x,v1y,v2x,v2y,role1,role2")

    def test_fig2_speaker_speaker_fails(self, capsys, config_dir):
        code, out, _ = run_cli(
            capsys, "simulate", "--env", str(config_dir / "fig2_env.json"),
            "--strategy", "speaker_speaker", "--seed", "0",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["success"] is False
        assert doc["failure_kind"] == "collision"

    def test_same_invocation_byte_identical(self, capsys, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for path in paths:
            code, _, _ = run_cli(
                capsys, "simulate", "--seed", "9", "--n", "4", "--strategy", "dynamic",
                "--T", "1", "--cv", "0.1", "--trajectory-out", str(path),
            )
            assert code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_unreadable_env_exits_2(self, capsys, tmp_path):
        missing = tmp_path / "missing.json"
        code, _, err = run_cli(capsys, "simulate", "--env", str(missing))
        assert code == 2
        assert "error" in err


@pytest.fixture()
def tiny_bench_config(tmp_path):
    config = {
        "base_seed": 5,
        "games_per_condition": 8,
        "conditions": [
            {"strategy": "dynamic", "T": 1, "n": 0, "geometry": "known", "cv": 0.0},
            {"strategy": "speaker_speaker", "T": 0, "n": 0, "geometry": "known", "cv": 0.0},
        ],
    }
    path = tmp_path / "bench.json"
    path.write_text(json.dumps(config))
    return path


class TestBench:
    def test_writes_reports(self, capsys, tiny_bench_config, tmp_path):
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(
            capsys, "bench", "--config", str(tiny_bench_config), "--out", str(out_dir)
        )
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["kind"] == "benchmark_report"
        csv_lines = (out_dir / "report.csv").read_text().splitlines()
        assert csv_lines[0] == "strategy,T,n,cv,lambda,failure_mean_steps,games"
        assert len(csv_lines) == 3
        summary = json.loads(out)
        assert summary["base_seed"] == 5

    def test_flag_overrides(self, capsys, tiny_bench_config, tmp_path):
        out_dir = tmp_path / "out2"
        code, out, _ = run_cli(
            capsys, "bench", "--config", str(tiny_bench_config), "--out", str(out_dir),
            "--games", "3", "--base-seed", "77",
        )
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["config"]["games_per_condition"] == 3
        assert report["config"]["base_seed"] == 77

    def test_failing_assert_exits_1(self, capsys, tmp_path):
        config = {
            "base_seed": 5,
            "games_per_condition": 8,
            "conditions": [
                {"strategy": "dynamic", "T": 1, "n": 0, "geometry": "known", "cv": 0.0},
            ],
            "asserts": [
                {
                    "kind": "at_least",
                    "a": {"strategy": "dynamic", "T": 1, "n": 0, "geometry": "known", "cv": 0.0},
                    "value": 1.1,
                }
            ],
        }
        path = tmp_path / "bench.json"
        path.write_text(json.dumps(config))
        code, _, err = run_cli(capsys, "bench", "--config", str(path), "--out", str(tmp_path / "o"))
        assert code == 1
        assert "assert failed" in err

    def test_invalid_config_exits_2_before_running(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"conditions": [], "games_per_condition": 5}))
        out_dir = tmp_path / "never"
        code, _, err = run_cli(capsys, "bench", "--config", str(path), "--out", str(out_dir))
        assert code == 2
        assert not out_dir.exists()

    def test_worker_flag_does_not_change_bytes(self, capsys, tiny_bench_config, tmp_path):
        outs = []
        for i, workers in enumerate(("1", "2")):
            out_dir = tmp_path / f"w{i}"
            code, _, _ = run_cli(
                capsys, "bench", "--config", str(tiny_bench_config), "--out", str(out_dir),
                "--workers", workers,
            )
            assert code == 0
            outs.append((out_dir / "report.json").read_bytes())
        assert outs[0] == outs[1]

    def test_threads_env_var(self, capsys, tiny_bench_config, tmp_path, monkeypatch):
        monkeypatch.setenv("ROLECOMMS_THREADS", "2")
        code, _, _ = run_cli(
            capsys, "bench", "--config", str(tiny_bench_config), "--out", str(tmp_path / "env")
        )
        assert code == 0
        monkeypatch.setenv("ROLECOMMS_THREADS", "soup")
        code, _, err = run_cli(
            capsys, "bench", "--config", str(tiny_bench_config), "--out", str(tmp_path / "env2")
        )
        assert code == 2
        assert "ROLECOMMS_THREADS" in err


class TestSweep:
    def test_expands_cv_grid(self, capsys, tiny_bench_config, tmp_path):
        out_dir = tmp_path / "sweep"
        code, out, _ = run_cli(
            capsys, "sweep", "--config", str(tiny_bench_config), "--out", str(out_dir),
            "--cv", "0.001", "0.01", "0.1",
        )
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert len(report["conditions"]) == 6  # 2 base conditions x 3 cv values
        cvs = sorted({c["cv"] for c in report["conditions"]})
        assert cvs == [0.001, 0.01, 0.1]


class TestHelp:
    def test_subcommands_listed(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for sub in ("analyze", "simulate", "bench", "sweep"):
            assert sub in out

    def test_flags_enumerated(self, capsys):
        for sub, flags in (
            ("analyze", ["--system", "--mode", "--alloc", "--speaker", "--dts"]),
            ("simulate", ["--env", "--seed", "--strategy", "--T", "--cv", "--trajectory-out"]),
            ("bench", ["--config", "--out", "--games", "--base-seed", "--workers"]),
            ("sweep", ["--config", "--out", "--cv", "--workers"]),
        ):
            with pytest.raises(SystemExit):
                build_parser().parse_args([sub, "--help"])
            out = capsys.readouterr().out
            for flag in flags:
                assert flag in out

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["analyze", "--mode", "stability"])  # missing --system
        assert exc.value.code == 2
