"""Command line round trips: gen, track, metrics and a reduced ablation."""

import csv
import json

import pytest

from d2cip.cli import SEED_ENV, main
from d2cip.io import load_result, load_sequence
from d2cip.scenario import SyntheticScenario

from conftest import static_scenario
from d2cip.io import write_sequence


@pytest.fixture(autouse=True)
def _clean_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


def _sequence_dir(tmp_path, n_frames=4):
    d = tmp_path / "seq"
    write_sequence(d, static_scenario(n_frames=n_frames))
    return d


class TestGen:
    def test_writes_loadable_scenario(self, tmp_path, capsys):
        out = tmp_path / "lin"
        code = main(["gen", "linear", "--out", str(out), "--seed", "3",
                     "--param", "n_frames=8", "--param", "velocity=1,0",
                     "--name", "demo"])
        assert code == 0
        assert "wrote 8 unrendered frames" in capsys.readouterr().out
        sc = SyntheticScenario.load(out / "scenario.json")
        assert (sc.name, sc.seed, sc.n_frames) == ("demo", 3, 8)
        assert sc.positions[1, 0] - sc.positions[0, 0] == 1.0
        assert len(load_sequence(out)) == 8

    def test_render_flag_writes_frames(self, tmp_path):
        out = tmp_path / "lin"
        code = main(["gen", "linear", "--out", str(out), "--render",
                     "--param", "n_frames=3", "--param", "width=48",
                     "--param", "height=48", "--param", "margin=8",
                     "--param", "start=20,20", "--param", "velocity=1,0"])
        assert code == 0
        assert len(list(out.glob("*.pgm"))) == 3
        seq = load_sequence(out)
        assert seq.frames[0].pixels is not None

    def test_unknown_kind_exits_with_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["gen", "teleport", "--out", str(tmp_path / "x")])
        assert err.value.code == 2

    def test_malformed_param_reported(self, tmp_path, capsys):
        code = main(["gen", "linear", "--out", str(tmp_path / "x"),
                     "--param", "nonsense"])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_unknown_param_key_reported(self, tmp_path, capsys):
        code = main(["gen", "linear", "--out", str(tmp_path / "x"),
                     "--param", "wobble=3"])
        assert code == 1
        assert "wobble" in capsys.readouterr().err


class TestTrack:
    def test_runs_and_saves_result(self, tmp_path, capsys):
        seq_dir = _sequence_dir(tmp_path)
        out = tmp_path / "result.json"
        mcsv = tmp_path / "metrics.csv"
        code = main(["track", str(seq_dir), "--out", str(out),
                     "--metrics-out", str(mcsv),
                     "--n-total", "30", "--seed", "5"])
        assert code == 0
        printed = capsys.readouterr().out
        assert "precision@20" in printed and "lost frames 0" in printed
        result = load_result(out)
        assert result.config.n_total == 30 and result.config.seed == 5
        assert len(result.records) == 4
        with open(mcsv) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["curve", "threshold", "value"]
        assert len(rows) == 1 + 51 + 101

    def test_missing_directory_reported(self, tmp_path, capsys):
        code = main(["track", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "r.json")])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_bad_config_file_reported(self, tmp_path, capsys):
        seq_dir = _sequence_dir(tmp_path)
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus = 1\n")
        code = main(["track", str(seq_dir), "--config", str(cfg),
                     "--out", str(tmp_path / "r.json")])
        assert code == 1
        assert "config line 1" in capsys.readouterr().err

    def _run_seed_case(self, tmp_path, flags):
        out = tmp_path / "result.json"
        code = main(["track", str(tmp_path / "seq"), "--out", str(out),
                     "--n-total", "20"] + flags)
        assert code == 0
        return load_result(out).config.seed

    def test_seed_resolution_order(self, tmp_path, monkeypatch):
        _sequence_dir(tmp_path)
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 3\n")
        file_flags = ["--config", str(cfg)]
        assert self._run_seed_case(tmp_path, file_flags) == 3
        monkeypatch.setenv(SEED_ENV, "7")
        assert self._run_seed_case(tmp_path, file_flags) == 7
        assert self._run_seed_case(tmp_path, file_flags + ["--seed", "11"]) == 11

    def test_unparseable_env_seed_reported(self, tmp_path, monkeypatch, capsys):
        _sequence_dir(tmp_path)
        monkeypatch.setenv(SEED_ENV, "lucky")
        code = main(["track", str(tmp_path / "seq"),
                     "--out", str(tmp_path / "r.json")])
        assert code == 1
        assert SEED_ENV in capsys.readouterr().err


class TestMetricsCommand:
    def test_recomputes_from_result_file(self, tmp_path, capsys):
        seq_dir = _sequence_dir(tmp_path)
        result = tmp_path / "result.json"
        main(["track", str(seq_dir), "--out", str(result), "--n-total", "20"])
        capsys.readouterr()
        out = tmp_path / "metrics.csv"
        code = main(["metrics", str(result), "--out", str(out)])
        assert code == 0
        assert "precision@20" in capsys.readouterr().out
        with open(out) as fh:
            assert len(list(csv.reader(fh))) == 153


class TestAblate:
    def test_reduced_suite_writes_tables(self, tmp_path, capsys):
        out_dir = tmp_path / "ab"
        code = main(["ablate", "--out-dir", str(out_dir), "--per-kind", "1",
                     "--frames", "8", "--seeds", "0", "--n-total", "40"])
        assert code == 0
        printed = capsys.readouterr().out.strip().splitlines()
        assert len(printed) == 8  # 4 variants x 2 metrics
        with open(out_dir / "ablation.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["variant", "metric", "value", "gain"]
        assert [r[0] for r in rows[1:]] == ["PF", "PF", "IPF", "IPF",
                                            "IPFK", "IPFK", "D2CIP", "D2CIP"]
        assert all(float(r[3]) == 0.0 for r in rows[1:3])  # baseline gain
        with open(out_dir / "ablation_runs.csv") as fh:
            runs = list(csv.reader(fh))
        assert runs[0] == ["variant", "scenario", "seed", "precision_at_20",
                           "success_auc", "lost_frames", "failed"]
        assert len(runs) == 1 + 4 * 4  # 4 variants x 4 sequences x 1 seed
        assert not any(r[6] == "1" for r in runs[1:])

    def test_bad_seed_list_reported(self, tmp_path, capsys):
        code = main(["ablate", "--out-dir", str(tmp_path), "--seeds", "a,b"])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_empty_seed_list_reported(self, tmp_path, capsys):
        code = main(["ablate", "--out-dir", str(tmp_path), "--seeds", ","])
        assert code == 1
        assert "seed" in capsys.readouterr().err

    def test_per_kind_out_of_range_reported(self, tmp_path, capsys):
        code = main(["ablate", "--out-dir", str(tmp_path), "--per-kind", "9"])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")


class TestParser:
    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code == 2

    def test_track_requires_sequence_argument(self):
        with pytest.raises(SystemExit) as err:
            main(["track"])
        assert err.value.code == 2
