import csv
import json
from pathlib import Path

import numpy as np
import pytest

from phaseforge import cli, hqs, numerics

data = pytest.importorskip("skimage.data")

# tiny training runs deliberately sit below the sample budget
pytestmark = pytest.mark.filterwarnings("ignore:r_params:RuntimeWarning")


def run(*argv):
    return cli.main([str(a) for a in argv])


def tree(d: Path) -> dict:
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def rows(path: Path) -> list:
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(autouse=True)
def no_data_env(monkeypatch):
    monkeypatch.delenv("PHASEFORGE_DATA", raising=False)


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cam = data.camera()[200:264, 200:264] / 255.0
    numerics.write_image(root / "cam.png", cam)
    coins = data.coins()[100:164, 100:164] / 255.0
    numerics.write_image(root / "coins.png", coins)
    rc = cli.main(["train", "--size", "64", "--levels", "3", "--k", "3", "--force",
                   "--max-iters", "30", "--out", str(root / "model")])
    assert rc == 0
    return root


class TestTrain:
    def test_outputs(self, work):
        m = json.loads((work / "model" / "model.json").read_text())
        assert "training_images" in json.dumps(m)
        rep = json.loads((work / "model" / "report.json").read_text())
        assert rep["k"] == 3 and rep["n_samples"] > 0

    def test_budget_guard_exit_2(self, tmp_path, capsys):
        assert run("train", "--size", "64", "--levels", "3", "--k", "3", "--out", tmp_path) == 2
        assert "r_params" in capsys.readouterr().err

    def test_run_json_excludes_volatile_keys(self, work):
        doc = json.loads((work / "model" / "run.json").read_text())
        assert doc["command"] == "train" and doc["format"] == "phaseforge-run/1"
        assert not {"out", "jobs", "command"} & set(doc["config"])

    def test_elbow(self, tmp_path):
        assert run("train", "--size", "64", "--levels", "3", "--k-range", "1:4", "--folds", "2",
                   "--force", "--max-iters", "20", "--out", tmp_path) == 0
        assert rows(tmp_path / "elbow.csv")[0] == ["K", "heldout_log_likelihood"]
        assert len(rows(tmp_path / "elbow.csv")) == 5


class TestDenoise:
    def test_runs(self, work, tmp_path):
        assert run("denoise", "--model", work / "model" / "model.json", "--images",
                   work / "cam.png", "--levels", "3", "--out", tmp_path) == 0
        r = rows(tmp_path / "metrics.csv")
        assert r[0][:2] == ["image", "sigma"] and r[1][0] == "cam"
        assert (tmp_path / "cam_restored.png").exists() and (tmp_path / "cam_degraded.png").exists()

    def test_sigma_zero_sentinel(self, work, tmp_path):
        assert run("denoise", "--model", work / "model" / "model.json", "--images",
                   work / "cam.png", "--levels", "3", "--sigma", "0", "--out", tmp_path) == 0
        r = rows(tmp_path / "metrics.csv")[1]
        assert r[2] == "inf" and float(r[3]) == 1.0

    def test_refuses_training_image(self, work, tmp_path, capsys):
        from phaseforge import textures

        img = next(iter(textures.corpus(64, 0).values()))
        numerics.write_image(tmp_path / "seen.png", img)
        # the quantized file matches the digest recorded at training time
        assert run("denoise", "--model", work / "model" / "model.json", "--images",
                   tmp_path / "seen.png", "--levels", "3", "--out", tmp_path / "o") == 3
        assert "refused" in capsys.readouterr().err

    def test_missing_image_exit_2(self, work, tmp_path):
        assert run("denoise", "--model", work / "model" / "model.json", "--images",
                   tmp_path / "nope.png", "--out", tmp_path) == 2


class TestRetrieve:
    def test_pairs_and_traces(self, work, tmp_path):
        assert run("retrieve", "--model", work / "model" / "model.json", "--images",
                   work / "cam.png", work / "coins.png", "--size", "32", "--inits", "2",
                   "--T", "20", "--n-est", "10", "--out", tmp_path) == 0
        assert len(rows(tmp_path / "pairs.csv")) == 1 + 4
        assert len(list(tmp_path.glob("trace_*.csv"))) == 8
        summ = rows(tmp_path / "summary.csv")
        assert [r[0] for r in summ] == ["statistic", "mean", "std", "n"]
        assert (tmp_path / "histogram.csv").exists()

    def test_magnitude_mode(self, work, tmp_path):
        img = numerics.read_image(work / "cam.png")[:32, :32]
        from phaseforge.retrieval import pad_image

        np.save(tmp_path / "mag.npy", np.abs(np.fft.fft2(pad_image(img))))
        assert run("retrieve", "--model", work / "model" / "model.json", "--magnitude",
                   tmp_path / "mag.npy", "--T", "10", "--n-est", "5", "--out", tmp_path / "o") == 0
        assert rows(tmp_path / "o" / "pairs.csv")[0][-1] == "d_f"


class TestRestore:
    def test_identity_round_trip(self, work, tmp_path):
        assert run("restore", "--image", work / "cam.png", "--no-model", "--levels", "3",
                   "--alphas", "1e6,1e7", "--out", tmp_path) == 0
        y = numerics.read_image(work / "cam.png")
        out = numerics.read_image(tmp_path / "restored.png")
        # both sides are 8-bit files
        assert np.max(np.abs(out - y)) <= 1 / 255 + 1e-12
        assert rows(tmp_path / "objective.csv")[0][0] == "stage"

    def test_blur_with_truth(self, work, tmp_path):
        k = tmp_path / "k.txt"
        np.savetxt(k, hqs.gaussian_kernel(5, 1.0))
        assert run("restore", "--truth", work / "coins.png", "--kernel", k, "--noise", "0.01",
                   "--model", work / "model" / "model.json", "--levels", "3", "--alphas", "1,4",
                   "--out", tmp_path / "o") == 0
        m = {r[0]: float(r[1]) for r in rows(tmp_path / "o" / "metrics.csv")[1:]}
        assert m["restored"] >= m["degraded"]
        assert (tmp_path / "o" / "degraded.png").exists()

    def test_bad_kernel_exit_2(self, work, tmp_path, capsys):
        k = tmp_path / "k.txt"
        k.write_text("1 1\n1 1\n")
        assert run("restore", "--image", work / "cam.png", "--kernel", k, "--no-model",
                   "--out", tmp_path / "o") == 2
        assert "odd" in capsys.readouterr().err

    def test_numeric_abort_exit_4(self, work, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise hqs.HqsDivergence("energy blew up", [1.0, 50.0])

        monkeypatch.setattr(hqs, "hqs_restore", boom)
        assert run("restore", "--image", work / "cam.png", "--no-model",
                   "--out", tmp_path) == 4


class TestAppendix:
    def test_slope_passes(self, tmp_path, capsys):
        assert run("appendix-check", "--out", tmp_path) == 0
        assert "pass" in capsys.readouterr().out
        assert rows(tmp_path / "appendix.csv")[-1] == ["pass", "true"]

    def test_bad_etas(self, tmp_path):
        assert run("appendix-check", "--etas", "0.9,1.0", "--out", tmp_path) == 2


class TestReplay:
    @pytest.mark.parametrize("argv", [
        ["appendix-check", "--n", "128"],
        ["restore", "--truth", "{coins}", "--no-model", "--noise", "0.02", "--levels", "3",
         "--alphas", "1,4"],
        ["denoise", "--model", "{model}", "--images", "{cam}", "--levels", "3"],
        ["retrieve", "--model", "{model}", "--images", "{cam}", "--size", "32", "--T", "12",
         "--n-est", "4"],
        ["analyze", "--images", "{cam}", "--levels", "4", "--path-percents", "50"],
        ["train", "--size", "64", "--levels", "3", "--k", "2", "--force", "--max-iters", "10"],
    ], ids=lambda a: a[0])
    def test_byte_identical(self, work, tmp_path, argv):
        subs = {"{coins}": work / "coins.png", "{cam}": work / "cam.png",
                "{model}": work / "model" / "model.json"}
        argv = [str(subs.get(a, a)) for a in argv]
        assert run(*argv, "--out", tmp_path / "a") == 0
        assert run("replay", tmp_path / "a" / "run.json", "--out", tmp_path / "b") == 0
        a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
        assert a.keys() == b.keys() and all(a[k] == b[k] for k in a)

    def test_jobs_do_not_change_outputs(self, work, tmp_path):
        argv = ["retrieve", "--model", work / "model" / "model.json", "--images", work / "cam.png",
                work / "coins.png", "--size", "32", "--T", "8", "--n-est", "4"]
        assert run(*argv, "--jobs", "1", "--out", tmp_path / "a") == 0
        assert run(*argv, "--jobs", "2", "--out", tmp_path / "b") == 0
        assert tree(tmp_path / "a") == tree(tmp_path / "b")

    def test_unreadable_run_file(self, tmp_path):
        (tmp_path / "run.json").write_text("{")
        assert run("replay", tmp_path / "run.json", "--out", tmp_path / "o") == 2
