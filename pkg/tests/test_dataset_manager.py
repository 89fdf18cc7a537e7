import json

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from swr.base_manager import BaseManager
from swr.dataset_manager import DatasetFile, DatasetManager
from swr.errors import DataError
from swr.model import SwrModel, TimeSeriesPair, predict


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestReadDataset(object):
    def test_reads_columns(self, tmp_path):
        path = write(tmp_path, "rain,flow\n1.0,2.0\n0,2.5\n3e-1,4\n")
        data = DatasetManager.read_dataset(DatasetFile(path, input_column="rain", target_column="flow"))
        assert_array_equal(data.x, [1.0, 0.0, 0.3])
        assert_array_equal(data.y, [2.0, 2.5, 4.0])
        assert_array_equal(data.index, [0, 1, 2])

    def test_no_header_and_delimiter(self, tmp_path):
        path = write(tmp_path, "1;2\n3;4\n")
        data = DatasetManager.read_dataset(DatasetFile(path, input_column="0", target_column="1",
                                                       delimiter=";", header=False))
        assert_array_equal(data.y, [2.0, 4.0])

    def test_bad_cell_reports_line(self, tmp_path):
        path = write(tmp_path, "x,y\n1,2\n3,abc\n")
        with pytest.raises(DataError, match=r"line 3, column 'y'.*'abc'"):
            DatasetManager.read_dataset(DatasetFile(path))

    def test_missing_cell(self, tmp_path):
        path = write(tmp_path, "x,y\n1,2\n,4\n")
        with pytest.raises(DataError, match="line 3"):
            DatasetManager.read_dataset(DatasetFile(path))

    def test_ragged_row(self, tmp_path):
        path = write(tmp_path, "x,y\n1,2\n3,4,5\n")
        with pytest.raises(DataError, match="line"):
            DatasetManager.read_dataset(DatasetFile(path))

    def test_missing_column(self, tmp_path):
        path = write(tmp_path, "x,z\n1,2\n")
        with pytest.raises(DataError, match="'y' not found"):
            DatasetManager.read_dataset(DatasetFile(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            DatasetManager.read_dataset(DatasetFile(tmp_path / "nope.csv"))

    def test_empty(self, tmp_path):
        with pytest.raises(DataError):
            DatasetManager.read_dataset(DatasetFile(write(tmp_path, "")))
        with pytest.raises(DataError):
            DatasetManager.read_dataset(DatasetFile(write(tmp_path, "x,y\n", name="header_only.csv")))

    def test_time_column(self, tmp_path):
        path = write(tmp_path, "t,x,y\n10,1,2\n11,3,4\n13,5,6\n")
        data = DatasetManager.read_dataset(DatasetFile(path, time_column="t"))
        assert_array_equal(data.index, [10, 11, 13])

    def test_time_out_of_order(self, tmp_path):
        path = write(tmp_path, "t,x,y\n1,1,2\n3,3,4\n2,5,6\n")
        with pytest.raises(DataError, match="line 4: rows are not in increasing time order"):
            DatasetManager.read_dataset(DatasetFile(path, time_column="t"))

    def test_fractional_time(self, tmp_path):
        path = write(tmp_path, "t,x,y\n1,1,2\n1.5,3,4\n")
        with pytest.raises(DataError, match="integers"):
            DatasetManager.read_dataset(DatasetFile(path, time_column="t"))

    def test_prediction_input_without_target(self, tmp_path):
        path = write(tmp_path, "x\n1\n2\n")
        result = DatasetManager.read_prediction_input(DatasetFile(path))
        assert result["y"] is None
        assert_array_equal(result["x"], [1.0, 2.0])


class TestWrite(object):
    def test_dataset_round_trip(self, tmp_path):
        data = TimeSeriesPair(np.array([0.1, 1.0 / 3.0]), np.array([2.0, np.pi]), index=[5, 6])
        path = DatasetManager.write_dataset(tmp_path / "out.csv", data)
        restored = DatasetManager.read_dataset(DatasetFile(path, time_column="time"))
        assert_array_equal(restored.x, data.x)
        assert_array_equal(restored.y, data.y)
        assert_array_equal(restored.index, [5, 6])

    def test_predictions(self, tmp_path):
        model = SwrModel.from_params([1.0], [1.0], [0.0])
        x = np.array([1.0, 2.0, 3.0])
        path = DatasetManager.write_predictions(tmp_path / "p.csv", np.arange(3), x, predict(model, x))
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["time", "x", "y_hat", "valid"]
        assert frame["valid"].tolist() == [0, 1, 1]
        assert np.isnan(frame["y_hat"][0])
        assert frame["y_hat"].tolist()[1:] == [1.0, 2.0]

    def test_kernels(self, tmp_path):
        model = SwrModel.from_params([1.0, 3.0], [2.0, 5.0], [0.0, 0.0])
        frame = pd.read_csv(DatasetManager.write_kernels(tmp_path / "k.csv", model))
        assert list(frame.columns) == ["lag", "window_1", "window_2", "combined", "normalized"]
        assert_allclose(frame["normalized"], [0, 0, 0.25, 0, 0, 0.75])
        assert_allclose(frame["combined"], frame["window_1"] + frame["window_2"])


class TestJson(object):
    def test_invalid_json_reports_position(self, tmp_path):
        path = write(tmp_path, '{"windows": [\n  {"beta": 1,}\n]}', name="bad.json")
        with pytest.raises(DataError, match="line 2"):
            BaseManager.read_json(path)

    def test_unserializable(self, tmp_path):
        with pytest.raises(DataError):
            BaseManager.write_json(tmp_path / "x.json", {"value": object()})

    def test_load_model_variants(self, tmp_path):
        model = SwrModel.from_params([1.0], [2.0], [0.5])
        for name, document in (("model.json", model.to_dict()),
                               ("report.json", {"model": model.to_dict()}),
                               ("truth.json", {"truth": model.to_dict(), "alpha": 0.1})):
            path = BaseManager.write_json(tmp_path / name, document)
            assert DatasetManager.load_model(path).to_dict() == model.to_dict()

    def test_load_model_rejects_other_documents(self, tmp_path):
        path = write(tmp_path, json.dumps({"rows": []}), name="other.json")
        with pytest.raises(DataError):
            DatasetManager.load_model(path)

    def test_ensure_dir(self, tmp_path):
        path = BaseManager.ensure_dir(tmp_path / "a" / "b")
        assert path.is_dir()
