import json

import pandas as pd
import pytest
from numpy.testing import assert_allclose

from swr.cli import build_parser, main
from swr.model import SwrModel


@pytest.fixture
def truth_file(tmp_path):
    path = tmp_path / "truth_model.json"
    path.write_text(json.dumps(SwrModel.from_params([2.0], [3.0], [1.0]).to_dict()))
    return path


@pytest.fixture
def simulated(tmp_path, truth_file):
    out_dir = tmp_path / "sim"
    code = main(["simulate", "--truth", str(truth_file), "--alpha", "0.05", "--length", "800",
                 "--seed", "3", "--out-dir", str(out_dir)])
    assert code == 0
    return out_dir


def read_activity(out_dir):
    return [json.loads(line) for line in (out_dir / "activity.jsonl").read_text().splitlines()]


class TestSimulate(object):
    def test_outputs(self, simulated):
        frame = pd.read_csv(simulated / "dataset.csv")
        assert list(frame.columns) == ["time", "x", "y", "y_clean", "noise"]
        assert len(frame) == 800
        truth = json.loads((simulated / "truth.json").read_text())
        assert truth["alpha"] == 0.05
        assert truth["truth"]["windows"][0]["delta"] == 3.0
        assert read_activity(simulated)[-1]["status"] == "Success"

    def test_sampled_truth_with_ar_noise(self, tmp_path):
        out_dir = tmp_path / "sampled"
        assert main(["simulate", "--k", "2", "--phi", "0.5", "--length", "300", "--out-dir", str(out_dir)]) == 0
        truth = json.loads((out_dir / "truth.json").read_text())
        assert len(truth["truth"]["windows"]) == 2
        assert truth["error_process"] == {"kind": "ar", "phi": [0.5]}

    def test_explosive_phi_is_numerical_failure(self, tmp_path):
        assert main(["simulate", "--phi", "1.5", "--length", "300", "--out-dir", str(tmp_path / "bad")]) == 3


class TestFit(object):
    def test_fit_writes_outputs(self, tmp_path, simulated, capsys):
        out_dir = tmp_path / "fit"
        code = main(["fit", str(simulated / "dataset.csv"), "--time-column", "time", "--k-max", "1",
                     "--uncertainty", "--out-dir", str(out_dir)])
        assert code == 0
        model = json.loads((out_dir / "model.json").read_text())
        assert_allclose(model["windows"][0]["delta"], 3.0, atol=0.3)
        assert_allclose(model["windows"][0]["beta"], 2.0, atol=0.2)
        report = json.loads((out_dir / "report.json").read_text())
        assert report["selected_k"] == 1
        assert report["n_points"] == 600
        uncertainty = json.loads((out_dir / "uncertainty.json").read_text())
        assert uncertainty["windows"][0]["beta"]["se"] > 0
        kernels = pd.read_csv(out_dir / "kernels.csv")
        assert_allclose(kernels["normalized"].sum(), 1.0)
        assert "log L" in capsys.readouterr().out

    def test_fit_is_deterministic(self, tmp_path, simulated):
        for name in ("a", "b"):
            assert main(["fit", str(simulated / "dataset.csv"), "--k-max", "1",
                         "--out-dir", str(tmp_path / name)]) == 0
        assert (tmp_path / "a" / "report.json").read_text() == (tmp_path / "b" / "report.json").read_text()

    def test_autocorr_section(self, tmp_path, simulated):
        out_dir = tmp_path / "fit_ar"
        code = main(["fit", str(simulated / "dataset.csv"), "--k-max", "1", "--autocorr", "--n-boot", "100",
                     "--out-dir", str(out_dir)])
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["autocorr"]["dw_before"]["p"] is not None

    def test_malformed_csv(self, tmp_path):
        data = tmp_path / "bad.csv"
        data.write_text("x,y\n1,2\n2,oops\n")
        out_dir = tmp_path / "bad_fit"
        assert main(["fit", str(data), "--out-dir", str(out_dir)]) == 2
        last = read_activity(out_dir)[-1]
        assert last["status"] == "Error"
        assert "line 3" in last["message"]

    def test_negative_input(self, tmp_path):
        data = tmp_path / "negative.csv"
        rows = [f"{-0.5 if i == 20 else 0.5},1.0" for i in range(60)]
        data.write_text("x,y\n" + "\n".join(rows) + "\n")
        assert main(["fit", str(data), "--out-dir", str(tmp_path / "negative")]) == 2

    def test_max_lag(self, tmp_path, simulated):
        out_dir = tmp_path / "fit_lag"
        assert main(["fit", str(simulated / "dataset.csv"), "--k-max", "1", "--max-lag", "8",
                     "--out-dir", str(out_dir)]) == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["lag_limit"] == 8
        assert report["iterations"][0]["n_valid"] == 600 - 8

    def test_too_short(self, tmp_path):
        data = tmp_path / "short.csv"
        data.write_text("x,y\n1,2\n2,3\n3,4\n")
        assert main(["fit", str(data), "--split", "1", "--out-dir", str(tmp_path / "short")]) == 2

    def test_invalid_k_max(self, tmp_path, simulated):
        code = main(["fit", str(simulated / "dataset.csv"), "--k-max", "0", "--out-dir", str(tmp_path / "k0")])
        assert code == 2


class TestPredictAndEvaluate(object):
    def test_predict(self, tmp_path, simulated, truth_file):
        out_dir = tmp_path / "pred"
        assert main(["predict", str(truth_file), str(simulated / "dataset.csv"), "--out-dir", str(out_dir)]) == 0
        frame = pd.read_csv(out_dir / "predictions.csv")
        assert list(frame.columns) == ["time", "x", "y", "y_hat", "valid"]
        max_lag = SwrModel.from_params([2.0], [3.0], [1.0]).max_lag
        assert frame["valid"].tolist()[:max_lag] == [0] * max_lag
        assert frame["valid"].iloc[max_lag:].eq(1).all()
        assert frame["y_hat"].iloc[:max_lag].isna().all()

    def test_predict_from_truth_document(self, tmp_path, simulated):
        out_dir = tmp_path / "pred_truth"
        assert main(["predict", str(simulated / "truth.json"), str(simulated / "dataset.csv"),
                     "--out-dir", str(out_dir)]) == 0
        frame = pd.read_csv(out_dir / "predictions.csv")
        clean = pd.read_csv(simulated / "dataset.csv")["y_clean"]
        valid = frame["valid"] == 1
        assert_allclose(frame["y_hat"][valid], clean[valid], atol=1e-12)

    def test_evaluate_noiseless(self, tmp_path, truth_file):
        sim_dir = tmp_path / "clean"
        assert main(["simulate", "--truth", str(truth_file), "--alpha", "0", "--length", "400",
                     "--out-dir", str(sim_dir)]) == 0
        out_dir = tmp_path / "eval"
        assert main(["evaluate", str(sim_dir / "truth.json"), str(sim_dir / "dataset.csv"),
                     "--out-dir", str(out_dir)]) == 0
        scores = json.loads((out_dir / "scores.json").read_text())
        assert scores["split"] == 0.75
        for part in ("train", "test"):
            assert_allclose(scores[part]["r2"], 1.0)
            assert_allclose(scores[part]["kge"], 1.0)
            assert_allclose(scores[part]["rmse"], 0.0, atol=1e-12)
        assert scores["test"]["n_points"] == 100
        assert "transformed" not in scores

    def test_evaluate_fit_report_with_correction(self, tmp_path, simulated):
        report = {
            "model": SwrModel.from_params([2.0], [3.0], [1.0], intercept=0.5).to_dict(),
            "autocorr": {"applied": True, "phi": [0.5], "innovation_sd": 0.1},
        }
        report_path = tmp_path / "report.json"
        report_path.write_text(json.dumps(report))
        out_dir = tmp_path / "eval_ar"
        assert main(["evaluate", str(report_path), str(simulated / "dataset.csv"), "--out-dir", str(out_dir)]) == 0
        scores = json.loads((out_dir / "scores.json").read_text())
        assert set(scores["transformed"]) == {"train", "test"}
        assert scores["transformed"]["test"]["n_points"] == scores["test"]["n_points"]


class TestStudy(object):
    def test_tiny_grid(self, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"ks": [1], "setups_per_k": 1, "alphas": [0.05], "length": 400}))
        out_dir = tmp_path / "study"
        code = main(["study", "--grid", str(grid), "--k-max", "1", "--workers", "1", "--n-boot", "100",
                     "--seed", "5", "--out-dir", str(out_dir)])
        assert code == 0
        frame = pd.read_csv(out_dir / "study.csv")
        assert len(frame) == 1
        assert frame["error"].isna().all()
        summary = json.loads((out_dir / "study_summary.json").read_text())
        assert summary["grid"]["seed_base"] == 5

    def test_unknown_grid_key(self, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"size": 3}))
        assert main(["study", "--grid", str(grid), "--out-dir", str(tmp_path / "s")]) == 2


class TestUsage(object):
    @pytest.mark.parametrize("argv", [[], ["fit"], ["bogus"], ["fit", "data.csv", "--criterion", "hqc"]])
    def test_usage_errors_exit_with_one(self, argv):
        with pytest.raises(SystemExit) as excinfo:
            main(argv)
        assert excinfo.value.code == 1

    def test_help_exits_cleanly(self):
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(["--help"])
        assert excinfo.value.code == 0
