"""End-to-end CLI runs in temporary directories: outputs, determinism, exit codes."""

import json

import numpy as np
import pytest

from evidkit.cli import main


def run(argv):
    return main(argv)


@pytest.fixture()
def data_dir(tmp_path):
    d = tmp_path / "data"
    assert run(["gen-data", "--out-dir", str(d), "--n-train", "120", "--n-test", "200",
                "--seed", "5", "--ood", "--n-ood", "50"]) == 0
    return d


class TestGenData:
    def test_writes_expected_files(self, data_dir):
        assert (data_dir / "train.csv").exists()
        assert (data_dir / "test.csv").exists()
        assert (data_dir / "ood.csv").exists()
        header = (data_dir / "train.csv").read_text().splitlines()[0]
        assert header == "x1,x2,label"
        assert len((data_dir / "train.csv").read_text().splitlines()) == 121

    def test_rerun_is_byte_identical(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        for d in (d1, d2):
            assert run(["gen-data", "--out-dir", str(d), "--n-train", "50",
                        "--n-test", "50", "--seed", "9"]) == 0
        assert (d1 / "train.csv").read_bytes() == (d2 / "train.csv").read_bytes()
        assert (d1 / "test.csv").read_bytes() == (d2 / "test.csv").read_bytes()

    def test_segmentation_tasks(self, tmp_path):
        d = tmp_path / "seg"
        assert run(["gen-data", "--out-dir", str(d), "--seg", "--n-tasks", "2",
                    "--width", "32", "--height", "32", "--n-blobs", "2", "--seed", "3"]) == 0
        assert (d / "task_000" / "mask.csv").exists()
        assert (d / "task_001" / "channel1.csv").exists()


class TestTrain:
    def test_kmeans_run_writes_outputs(self, data_dir, tmp_path):
        out = tmp_path / "run"
        assert run(["train", "--data", str(data_dir / "train.csv"), "--model", "enn",
                    "--init", "kmeans", "--I", "6", "--epochs", "20", "--lr", "0.1",
                    "--lambda", "1e-3", "--seed", "1", "--out-dir", str(out)]) == 0
        ckpt = json.loads((out / "checkpoint.json").read_text())
        assert ckpt["model"] == "enn"
        assert ckpt["layer"]["I"] == 6
        history = (out / "history.csv").read_text().splitlines()
        assert history[0] == "epoch,loss,train_err,val_err,mean_ignorance"
        assert len(history) == 21

    def test_zero_epochs_initial_checkpoint(self, data_dir, tmp_path):
        out = tmp_path / "run0"
        assert run(["train", "--data", str(data_dir / "train.csv"), "--model", "rbf",
                    "--epochs", "0", "--out-dir", str(out), "--seed", "2"]) == 0
        ckpt = json.loads((out / "checkpoint.json").read_text())
        np.testing.assert_allclose(ckpt["layer"]["gamma"], 0.01, rtol=1e-12)
        assert (out / "history.csv").read_text().splitlines() == [
            "epoch,loss,train_err,val_err,mean_ignorance"
        ]

    def test_deterministic_checkpoints(self, data_dir, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert run(["train", "--data", str(data_dir / "train.csv"), "--model", "rbf",
                        "--epochs", "15", "--lr", "0.05", "--seed", "7",
                        "--out-dir", str(out)]) == 0
            outs.append((out / "checkpoint.json").read_bytes())
        assert outs[0] == outs[1]

    def test_feature_net_four_stage(self, data_dir, tmp_path):
        out = tmp_path / "staged"
        assert run(["train", "--data", str(data_dir / "train.csv"), "--model", "enn",
                    "--init", "kmeans", "--feature-net", "--H", "2", "--hidden", "8",
                    "--I", "4", "--epochs", "15", "--lr", "0.01",
                    "--out-dir", str(out), "--seed", "3"]) == 0
        ckpt = json.loads((out / "checkpoint.json").read_text())
        assert ckpt["feature_net"] is not None
        assert ckpt["feature_net"]["sizes"] == [2, 8, 2]

    def test_missing_data_is_io_error(self, tmp_path):
        assert run(["train", "--data", str(tmp_path / "absent.csv"),
                    "--out-dir", str(tmp_path)]) == 2


class TestSweep:
    def test_grid_rows_and_determinism(self, tmp_path):
        spec = {
            "models": ["enn", "rbf"],
            "lambdas": [1e-3, 1e-1],
            "seeds": [0, 1],
            "I": 4,
            "init": "kmeans",
            "epochs": 10,
            "lr": 0.1,
            "data": {"n_train": 80, "n_test": 100, "noise": 0.1, "seed": 11},
        }
        spec_path = tmp_path / "sweep.json"
        spec_path.write_text(json.dumps(spec))
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert run(["sweep", "--spec", str(spec_path), "--out-dir", str(out1)]) == 0
        assert run(["sweep", "--spec", str(spec_path), "--out-dir", str(out2),
                    "--workers", "2"]) == 0
        rows1 = (out1 / "sweep.csv").read_text().splitlines()
        assert rows1[0] == "model,lambda,seed,test_error,mean_ignorance"
        assert len(rows1) == 9  # 2 models x 2 lambdas x 2 seeds
        # a 2-worker pool merges in grid order and matches the serial run
        assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


class TestEvalAndContours:
    @pytest.fixture()
    def trained(self, data_dir, tmp_path):
        out = tmp_path / "model"
        assert run(["train", "--data", str(data_dir / "train.csv"), "--model", "enn",
                    "--init", "kmeans", "--I", "6", "--epochs", "40", "--lr", "0.2",
                    "--lambda", "1e-3", "--seed", "1", "--out-dir", str(out)]) == 0
        return out / "checkpoint.json"

    def test_eval_report(self, data_dir, trained, tmp_path):
        out = tmp_path / "eval"
        assert run(["eval", "--checkpoint", str(trained), "--data",
                    str(data_dir / "test.csv"), "--out-dir", str(out)]) == 0
        header, values = (out / "report.csv").read_text().splitlines()
        assert header == "ece,error,mean_ignorance,n"
        report = dict(zip(header.split(","), [float(v) for v in values.split(",")]))
        assert 0 <= report["error"] <= 1
        assert 0 <= report["ece"] <= 1

    def test_ood_ignorance_exceeds_test(self, data_dir, trained, tmp_path):
        reports = {}
        for name in ("test", "ood"):
            out = tmp_path / f"eval_{name}"
            assert run(["eval", "--checkpoint", str(trained), "--data",
                        str(data_dir / f"{name}.csv"), "--out-dir", str(out)]) == 0
            header, values = (out / "report.csv").read_text().splitlines()
            reports[name] = dict(zip(header.split(","), [float(v) for v in values.split(",")]))
        assert reports["ood"]["mean_ignorance"] > reports["test"]["mean_ignorance"]

    def test_contours_grid(self, trained, tmp_path):
        out = tmp_path / "grid"
        assert run(["contours", "--checkpoint", str(trained), "--resolution", "20",
                    "--out-dir", str(out)]) == 0
        rows = (out / "contours.csv").read_text().splitlines()
        assert rows[0] == "x,y,m1,m2,mOmega"
        assert len(rows) == 401
        masses = np.array([[float(v) for v in r.split(",")[2:]] for r in rows[1:]])
        np.testing.assert_allclose(masses.sum(axis=1), 1.0, atol=1e-10)

    def test_eval_segmentation(self, tmp_path):
        seg_dir = tmp_path / "segdata"
        assert run(["gen-data", "--out-dir", str(seg_dir), "--seg", "--n-tasks", "2",
                    "--width", "32", "--height", "32", "--n-blobs", "2", "--seed", "8"]) == 0
        out = tmp_path / "segrun"
        assert run(["train", "--seg", "--data", str(seg_dir / "task_000"),
                    "--model", "rbf", "--init", "random", "--feature-net", "--H", "2",
                    "--I", "4", "--epochs", "60", "--lr", "0.01", "--loss", "dice",
                    "--out-dir", str(out), "--seed", "4"]) == 0
        ev = tmp_path / "segeval"
        assert run(["eval", "--seg", "--checkpoint", str(out / "checkpoint.json"),
                    "--data", str(seg_dir / "task_001"), "--out-dir", str(ev)]) == 0
        header, values = (ev / "report.csv").read_text().splitlines()
        report = dict(zip(header.split(","), [float(v) for v in values.split(",")]))
        assert "dice" in report and 0 <= report["dice"] <= 1
