import json
import subprocess
import sys

import numpy as np
import pytest

from ipsae import cli, data, model


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def noiseless_dir(tmp_path):
    out = tmp_path / "noiseless"
    assert cli.main(["gen-data", "--synthetic", "noise_sigma=0", "--out", str(out)]) == 0
    return out


class TestEndToEnd:
    def test_fit_then_eval_zsl(self, capsys, tmp_path, noiseless_dir):
        run_dir = tmp_path / "run"
        code, out, _ = run(capsys, "fit", "--dataset", noiseless_dir, "--out", run_dir)
        assert code == 0 and "nullified_modes=0" in out
        fit_doc = json.loads((run_dir / "fit.json").read_text())
        assert fit_doc["m"] == 44 and fit_doc["rank_W"] == 12
        code, out, _ = run(capsys, "eval", "--dataset", noiseless_dir,
                           "--model", run_dir / "model.bin", "--out", run_dir)
        assert code == 0
        assert out.strip().splitlines()[-1] == "mean_per_class_accuracy=1.0000"
        report = json.loads((run_dir / "report.json").read_text())
        assert report["mean_per_class_accuracy"] == 1.0
        assert report["diagnostics"]["nullified_modes"] == 0
        header = (run_dir / "confusion.csv").read_text().splitlines()[0]
        assert header.startswith("true\\pred,")

    def test_gzsl(self, capsys, tmp_path, noiseless_dir):
        code, out, _ = run(capsys, "eval", "--dataset", noiseless_dir, "--protocol", "gzsl",
                           "--out", tmp_path / "g")
        assert code == 0
        assert out.strip().endswith("harmonic_mean=1.0000")
        report = json.loads((tmp_path / "g" / "report.json").read_text())
        assert report["acc_seen"] == report["acc_unseen"] == 1.0

    @pytest.mark.parametrize("fmt", ["bin", "csv"])
    def test_gen_data_is_byte_deterministic(self, capsys, tmp_path, fmt):
        for name in ("a", "b"):
            run(capsys, "gen-data", "--synthetic", "d=8,k=4,C_seen=4,C_unseen=2",
                "--seed", 5, "--format", fmt, "--out", tmp_path / name)
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert files
        for f in files:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_original_space(self, capsys, tmp_path, noiseless_dir):
        code, out, _ = run(capsys, "fit", "--dataset", noiseless_dir, "--space", "original",
                           "--out", tmp_path / "o")
        assert code == 0 and "m=32" in out
        loaded = model.load_model(tmp_path / "o" / "model.bin")
        assert loaded.space_mode is model.SpaceMode.ORIGINAL

    def test_synthetic_flag_matches_dataset_dir(self, capsys, tmp_path):
        ref = tmp_path / "ref"
        run(capsys, "gen-data", "--out", ref)
        _, a, _ = run(capsys, "eval", "--dataset", ref, "--out", tmp_path / "x")
        _, b, _ = run(capsys, "eval", "--synthetic", "default", "--out", tmp_path / "y")
        assert a == b
        assert (tmp_path / "x" / "report.json").read_bytes() == \
            (tmp_path / "y" / "report.json").read_bytes()

    def test_config_file(self, capsys, tmp_path, noiseless_dir):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"# run settings\ndataset={noiseless_dir}\nlambda=2.5\nprotocol=gzsl\n"
                       f"out={tmp_path / 'c'}\n")
        code, out, _ = run(capsys, "eval", "--config", cfg)
        assert code == 0 and "harmonic_mean=1.0000" in out
        assert json.loads((tmp_path / "c" / "report.json").read_text())["lambda"] == 2.5

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "ipsae", "gen-data", "--synthetic",
                               "d=4,k=3,C_seen=3,C_unseen=1", "--out", str(tmp_path / "m")],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.strip() == "d=4 k=3 C=4 n=120"


class TestSweep:
    def test_single_point_matches_eval(self, capsys, tmp_path):
        _, sweep_out, _ = run(capsys, "sweep", "--synthetic", "default", "--grid", "1")
        _, eval_out, _ = run(capsys, "eval", "--synthetic", "default", "--out", tmp_path)
        acc = float(sweep_out.splitlines()[1].split(",")[1])
        assert f"mean_per_class_accuracy={acc:.4f}" == eval_out.strip()

    def test_output_and_determinism(self, capsys, tmp_path):
        code, first, _ = run(capsys, "sweep", "--synthetic", "default", "--grid", "0.1,1,10",
                             "--out", tmp_path / "s.csv")
        _, second, _ = run(capsys, "sweep", "--synthetic", "default", "--grid", "0.1,1,10")
        assert code == 0 and first == second
        lines = first.strip().splitlines()
        assert lines[0] == "lambda,accuracy,hubness_bound,nullified_modes"
        assert lines[-1].startswith("best_lambda=")
        bounds = [float(l.split(",")[2]) for l in lines[1:4]]
        assert bounds[0] > bounds[1] > bounds[2]
        assert (tmp_path / "s.csv").read_text().splitlines() == lines[:4]


class TestDenoise:
    def test_writes_outputs(self, capsys, tmp_path):
        data.write_matrix_csv(tmp_path / "raw.csv",
                              np.array([[1, 1, 0, 0], [1, 0, 1, 0], [0, 0, 0, 0]], dtype=float))
        (tmp_path / "labels.csv").write_text("0\n0\n1\n1\n")
        code, out, _ = run(capsys, "denoise", "--raw", tmp_path / "raw.csv",
                           "--labels", tmp_path / "labels.csv", "--out", tmp_path / "d")
        assert code == 0 and out.strip() == "attributes=3 classes=2 kept=1"
        assert (tmp_path / "d" / "kept.csv").read_text() == "0\n"
        np.testing.assert_array_equal(
            data.read_matrix_csv(tmp_path / "d" / "attributes.csv"), [[1.0, 0.0]])

    def test_zero_threshold(self, capsys, tmp_path):
        code, _, err = run(capsys, "denoise", "--raw", tmp_path / "r.csv", "--labels",
                           tmp_path / "l.csv", "--threshold", 0, "--out", tmp_path / "d")
        assert code == 2 and "threshold" in err


class TestEmbed:
    def test_writes_embedding(self, capsys, tmp_path):
        code, out, _ = run(capsys, "embed", "--synthetic", "default", "--out", tmp_path)
        assert code == 0 and out.startswith("silhouette_input=")
        lines = (tmp_path / "embedding.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 150


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        ["eval", "--synthetic", "default", "--lambda", "0"],
        ["eval", "--synthetic", "d=4,k=2,C_seen=3,C_unseen=2"],
        ["eval"],
        ["sweep", "--synthetic", "default", "--grid", "1,-2"],
        ["sweep", "--synthetic", "default"],
        ["eval", "--synthetic", "bogus=1"],
        ["fit", "--bad-flag"],
    ])
    def test_config_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 2

    def test_dimension_mismatch(self, capsys, tmp_path):
        run(capsys, "fit", "--synthetic", "d=8,k=4,C_seen=4,C_unseen=2", "--out", tmp_path)
        code, _, err = run(capsys, "eval", "--synthetic", "default",
                           "--model", tmp_path / "model.bin")
        assert code == 2 and "do not match" in err

    def test_missing_dataset(self, capsys, tmp_path):
        assert run(capsys, "eval", "--dataset", tmp_path / "nope")[0] == 3

    def test_corrupt_model(self, capsys, tmp_path):
        (tmp_path / "model.bin").write_bytes(b"garbage")
        assert run(capsys, "eval", "--synthetic", "default",
                   "--model", tmp_path / "model.bin")[0] == 3
