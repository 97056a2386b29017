import numpy as np
import pytest

from crisp_alloc.cli import main


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGenAllocateRoundTrip:
    def test_round_trip(self, tmp_path, capsys):
        cov = tmp_path / "cov.csv"
        code, out, _ = run_cli(
            ["gen", "--regime", "block", "--n", "12", "--out", str(cov), "--seed", "3"],
            capsys,
        )
        assert code == 0 and cov.exists()
        code, out, _ = run_cli(["allocate", "--method", "hrp", "--cov", str(cov)], capsys)
        assert code == 0
        weights = [float(x) for x in out.splitlines()[1].split(":")[1].split()]
        assert len(weights) == 12
        # printed at six significant digits
        assert sum(weights) == pytest.approx(1.0, abs=1e-5)

    def test_gen_with_signal(self, tmp_path, capsys):
        cov = tmp_path / "c.csv"
        code, out, _ = run_cli(
            [
                "gen", "--regime", "factor:k=2", "--n", "10",
                "--out", str(cov), "--signal", "gaussian:sigma=0.03",
            ],
            capsys,
        )
        assert code == 0
        mu_path = tmp_path / "c_mu.csv"
        assert mu_path.exists()
        code, _, _ = run_cli(
            ["allocate", "--method", "hrp-sigma-mu", "--gamma", "0.5",
             "--cov", str(cov), "--mu", str(mu_path)],
            capsys,
        )
        assert code == 0


class TestDeterminism:
    def test_allocate_output_bytes_identical(self, tmp_path, capsys):
        outs = []
        for i in range(2):
            path = tmp_path / f"w{i}.csv"
            code, _, _ = run_cli(
                ["allocate", "--method", "crisp", "--gamma", "0.5",
                 "--regime", "block", "--n", "10", "--seed", "9",
                 "--signal", "gaussian:sigma=0.02", "--out", str(path)],
                capsys,
            )
            assert code == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_experiment_output_bytes_identical(self, tmp_path, capsys, monkeypatch):
        blobs = []
        for i in range(2):
            root = tmp_path / f"run{i}"
            monkeypatch.setenv("CRISP_ALLOC_RESULTS_DIR", str(root))
            code, _, _ = run_cli(["experiment", "trajectory"], capsys)
            assert code == 0
            blobs.append((root / "trajectory" / "trajectory.csv").read_bytes())
        assert blobs[0] == blobs[1]


class TestErrors:
    def test_malformed_csv_line_column(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0,0.1\n0.1,oops\n")
        code, _, err = run_cli(["allocate", "--method", "hrp", "--cov", str(bad)], capsys)
        assert code == 1
        assert "bad.csv:2:2" in err

    def test_ragged_csv(self, tmp_path, capsys):
        bad = tmp_path / "ragged.csv"
        bad.write_text("1.0,0.1\n0.1\n")
        code, _, err = run_cli(["allocate", "--method", "hrp", "--cov", str(bad)], capsys)
        assert code == 1
        assert "ragged" in err

    def test_unknown_preset_lists_options(self, capsys):
        code, _, err = run_cli(["experiment", "bogus"], capsys)
        assert code == 2
        assert "recovery" in err and "oos_minvar" in err

    def test_missing_inputs(self, capsys):
        code, _, err = run_cli(["allocate", "--method", "hrp"], capsys)
        assert code == 1
        assert "--cov" in err or "--regime" in err


class TestConfigPrecedence:
    def test_config_sets_defaults_flags_override(self, tmp_path, capsys):
        cfg = tmp_path / "conf.ini"
        cfg.write_text("seed = 9\nn = 6\n")
        out_a = tmp_path / "a.csv"
        code, _, _ = run_cli(
            ["gen", "--regime", "block", "--config", str(cfg), "--out", str(out_a)],
            capsys,
        )
        assert code == 0
        assert len(out_a.read_text().splitlines()) == 6  # n from config
        out_b = tmp_path / "b.csv"
        code, _, _ = run_cli(
            ["gen", "--regime", "block", "--config", str(cfg), "--n", "4", "--out", str(out_b)],
            capsys,
        )
        assert len(out_b.read_text().splitlines()) == 4  # flag wins

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "conf.ini"
        cfg.write_text("volatility = 12\n")
        code, _, err = run_cli(
            ["gen", "--regime", "block", "--config", str(cfg), "--out", str(tmp_path / "x.csv")],
            capsys,
        )
        assert code == 2
        assert "volatility" in err


class TestResultsDir:
    def test_env_var_overrides_root(self, tmp_path, capsys, monkeypatch):
        root = tmp_path / "elsewhere"
        monkeypatch.setenv("CRISP_ALLOC_RESULTS_DIR", str(root))
        code, out, _ = run_cli(["experiment", "sweep_rate"], capsys)
        assert code == 0
        assert (root / "sweep_rate" / "sweep_rate.csv").exists()


class TestTrajectoryAndWorstMu:
    def test_trajectory_example(self, capsys):
        code, out, _ = run_cli(["trajectory", "--example", "nonmonotone", "--grid", "9"], capsys)
        assert code == 0
        rows = [line.split() for line in out.splitlines()[1:]]
        exact = [float(r[1]) for r in rows]
        assert exact[-1] < 1e-10
        assert max(exact) > exact[0]

    def test_worst_mu(self, capsys):
        code, out, _ = run_cli(
            ["worst-mu", "--regime", "hedged", "--n", "20", "--restarts", "4"], capsys
        )
        assert code == 0
        assert "dir_diag" in out
