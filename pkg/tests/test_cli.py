import csv
import json

import numpy as np
import pytest

from barvf.cli import build_parser, config_from_args, main


class TestParser:
    def test_flags_override_config(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"env_name": "confluence", "agent": "rvf", "episodes": 50, "prior_scale": 3.0}))
        args = build_parser().parse_args(["run", "--config", str(path), "--episodes", "7", "--seeds", "4,5"])
        cfg = config_from_args(args)
        assert cfg.env_name == "confluence"
        assert cfg.episodes == 7
        assert cfg.seeds == [4, 5]
        assert cfg.prior_scale == 3.0

    def test_bad_seed_list(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--env", "riverswim", "--agent", "rvf", "--seeds", "a,b"])
        assert exc.value.code != 0


class TestCommands:
    def test_run_writes_outputs(self, tmp_path, capsys):
        rc = main(["run", "--env", "riverswim", "--agent", "ba-rvf", "--beta", "10", "--z-samples", "4",
                   "--episodes", "3", "--seeds", "0,1", "--out", str(tmp_path)])
        assert rc == 0
        assert sorted(p.name for p in tmp_path.glob("*.csv")) == [
            "run_riverswim_ba-rvf_10_0.csv", "run_riverswim_ba-rvf_10_1.csv"]
        assert "final return" in capsys.readouterr().out

    def test_run_missing_beta(self, capsys):
        rc = main(["run", "--env", "riverswim", "--agent", "ba-rvf", "--episodes", "1"])
        assert rc != 0
        assert "beta" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        rc = main(["run", "--config", str(tmp_path / "nope.json")])
        assert rc != 0
        assert "nope.json" in capsys.readouterr().err

    def test_unknown_env(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--env", "atari"])
        assert exc.value.code != 0

    def test_sweep(self, tmp_path):
        rc = main(["sweep", "--env", "riverswim", "--betas", "0,1e6", "--episodes", "2", "--z-samples", "4",
                   "--out", str(tmp_path)])
        assert rc == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert [g["beta"] for g in summary["groups"]] == [0.0, 1e6]

    def test_rd_trace(self, tmp_path):
        matrix = tmp_path / "d.csv"
        np.savetxt(matrix, [[0.0, 1.0], [1.0, 0.0]], delimiter=",")
        rc = main(["rd-trace", "--matrix", str(matrix), "--betas", "20,0", "--out", str(tmp_path / "out")])
        assert rc == 0
        with (tmp_path / "out" / "rd_trace.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert [float(r["beta"]) for r in rows] == [0.0, 20.0]
        assert float(rows[0]["rate_nats"]) < 1e-12
        assert float(rows[1]["rate_nats"]) == pytest.approx(np.log(2), abs=1e-6)
        assert float(rows[0]["expected_distortion"]) == pytest.approx(0.5)

    def test_rd_trace_bad_matrix(self, tmp_path, capsys):
        matrix = tmp_path / "d.csv"
        matrix.write_text("0,inf\n1,0\n")
        rc = main(["rd-trace", "--matrix", str(matrix), "--betas", "1", "--out", str(tmp_path)])
        assert rc != 0
        assert capsys.readouterr().err

    def test_describe(self, tmp_path, capsys):
        assert main(["describe", "--env", "empty-grid"]) == 0
        assert json.loads(capsys.readouterr().out)["num_states"] == 256
        out = tmp_path / "mdp.json"
        assert main(["describe", "--env", "riverswim", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["horizon"] == 20
