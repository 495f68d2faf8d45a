import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revsent.errors import DataError, ShapeError
from revsent.evaluation import (
    DEFAULT_BUCKET_EDGES, bucket_labels, evaluate, export_curves, per_restaurant_bias, read_curves,
)
from revsent.model import EpochRecord, TrainHistory


class TestEvaluate:
    def test_small_example(self):
        rep = evaluate([0, 1, 1], [0, 0, 1], 2)
        assert rep.accuracy == pytest.approx(2 / 3)
        np.testing.assert_array_equal(rep.confusion, [[1, 1], [0, 1]])
        np.testing.assert_allclose(rep.precision, [1.0, 0.5])
        np.testing.assert_allclose(rep.recall, [0.5, 1.0])
        np.testing.assert_allclose(rep.f1, [2 / 3, 2 / 3])
        assert rep.macro_f1 == pytest.approx(2 / 3)

    def test_absent_class_is_undefined_not_zero(self):
        rep = evaluate([0, 0], [0, 0], 3)
        assert np.isnan(rep.precision[2]) and np.isnan(rep.recall[2])
        assert rep.macro_f1 == 1.0
        assert rep.to_json()["per_class"][2]["precision"] is None

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            evaluate([0, 1], [0])

    def test_empty(self):
        with pytest.raises(DataError):
            evaluate([], [])

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60))
    def test_against_counting_oracle(self, pairs):
        pred, true = map(list, zip(*pairs))
        rep = evaluate(pred, true, 5)
        assert rep.accuracy == sum(p == t for p, t in pairs) / len(pairs)
        for t in range(5):
            for p in range(5):
                assert rep.confusion[t, p] == sum(1 for a, b in pairs if (b, a) == (t, p))
        assert rep.confusion.sum() == rep.n == len(pairs)

    def test_write(self, tmp_path):
        path = evaluate([0, 1, 1], [0, 0, 1], 2).write(tmp_path / "r" / "report.json")
        obj = json.loads(path.read_text())
        assert obj["confusion"] == [[1, 1], [0, 1]] and obj["n"] == 3
        rows = list(csv.reader((tmp_path / "r" / "report_confusion.csv").open()))
        assert rows == [["true\\pred", "0", "1"], ["0", "1", "1"], ["1", "0", "1"]]


class TestBuckets:
    def test_default_labels(self):
        assert bucket_labels() == ["0", "1-5", "6-20", "21-100", ">100"]
        assert DEFAULT_BUCKET_EDGES == (0, 5, 20, 100)

    def test_bad_edges(self):
        with pytest.raises(ValueError):
            bucket_labels([5, 2])

    def test_assignment(self):
        counts = {"a": 0, "b": 1, "c": 5, "d": 6, "e": 100, "f": 101}
        names = ["a", "b", "c", "d", "e", "f", "unseen"]
        pred = [1, 1, 0, 1, 1, 0, 0]
        true = [1, 0, 0, 1, 1, 1, 1]
        groups = {g.bucket: g for g in per_restaurant_bias(pred, true, names, counts)}
        assert (groups["0"].count, groups["0"].accuracy) == (2, 0.5)  # "a" and the unseen one
        assert (groups["1-5"].count, groups["1-5"].accuracy) == (2, 0.5)
        assert (groups["6-20"].count, groups["6-20"].accuracy) == (1, 1.0)
        assert (groups["21-100"].count, groups["21-100"].accuracy) == (1, 1.0)
        assert (groups[">100"].count, groups[">100"].accuracy) == (1, 0.0)

    def test_empty_bucket_has_no_accuracy(self):
        groups = per_restaurant_bias([1], [1], ["x"], {"x": 3})
        assert [g.count for g in groups] == [0, 1, 0, 0, 0]
        assert groups[0].accuracy is None

    def test_misaligned(self):
        with pytest.raises(ShapeError):
            per_restaurant_bias([1, 0], [1], ["x"], {})


class TestCurves:
    def history(self, n=5):
        rng = np.random.default_rng(0)
        recs = [EpochRecord(e, *rng.random(3)) for e in range(1, n + 1)]
        return TrainHistory(recs, best_epoch=2)

    def test_round_trip_is_exact(self, tmp_path):
        hist = self.history()
        path = export_curves(hist, tmp_path / "curves.csv")
        assert len(path.read_text().splitlines()) == 6
        assert read_curves(path) == hist.rows()

    def test_header(self, tmp_path):
        path = export_curves(self.history(1), tmp_path / "c.csv")
        assert path.read_text().splitlines()[0] == "epoch,train_loss,val_loss,val_accuracy"

    def test_empty_history(self, tmp_path):
        with pytest.raises(DataError):
            export_curves(TrainHistory(), tmp_path / "c.csv")

    def test_wrong_header(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(DataError):
            read_curves(p)
