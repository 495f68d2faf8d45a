
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from revsent.classical import (
    MODELS, DecisionTree, GradientBoosting, Knn, LinearSvm, Mlp, RandomForest, gini, joint_features,
    load_baseline, make_baseline, save_baseline,
)
from revsent.classical import _splitter_py, splitter
from revsent.errors import ConfigError, DataError, NotFittedError, ShapeError

FAST = {"rf": {"n_trees": 10}, "gb": {"n_rounds": 10}, "mlp": {"n_epochs": 3}}


def blobs(seed, n=200, d=6, n_classes=2, noise=0.5):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, n_classes, size=n)
    centers = rng.normal(scale=2.0, size=(n_classes, d))
    return centers[y] + noise * rng.normal(size=(n, d)), y


def brute_gini_split(X, y, n_classes, samples, features):
    """Exhaustive search minimising the size-weighted child gini impurity."""
    best = (gini(np.bincount(y[samples], minlength=n_classes)), -1, None)
    for f in features:
        vals = np.unique(X[samples, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            left = samples[X[samples, f] <= lo]
            right = samples[X[samples, f] > lo]
            w = (len(left) * gini(np.bincount(y[left], minlength=n_classes))
                 + len(right) * gini(np.bincount(y[right], minlength=n_classes))) / len(samples)
            if w < best[0] - 1e-12:
                best = (w, f, (lo, hi))
    return best


class TestGini:
    def test_eight_two(self):
        # oracle: 1 - (8/10)^2 - (2/10)^2
        assert gini([8, 2]) == pytest.approx(1 - 0.8 ** 2 - 0.2 ** 2, abs=1e-15)
        assert gini([8, 2]) == 0.32

    @pytest.mark.parametrize("counts,expected", [([5], 0.0), ([3, 3], 0.5), ([0, 0], 0.0), ([1, 1, 1, 1], 0.75)])
    def test_known(self, counts, expected):
        assert gini(counts) == pytest.approx(expected)


class TestSplitter:
    def test_backend_reported(self):
        assert splitter.BACKEND in splitter.BACKENDS

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 40), st.integers(1, 4), st.integers(2, 4))
    def test_gini_matches_brute_force(self, seed, n, d, k):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 5, size=(n, d)).astype(float)
        y = rng.integers(0, k, size=n)
        samples = np.arange(n)
        f, t, _ = _splitter_py.best_split_gini(X, y, k, samples, np.arange(d))
        w, bf, interval = brute_gini_split(X, y, k, samples, range(d))
        if bf < 0:
            assert f == -1
            return
        assert f >= 0
        left = X[:, f] <= t
        got = (left.sum() * gini(np.bincount(y[left], minlength=k))
               + (~left).sum() * gini(np.bincount(y[~left], minlength=k))) / n
        assert got == pytest.approx(w, abs=1e-12)

    @pytest.mark.skipif("cython" not in splitter.BACKENDS, reason="compiled kernel not built")
    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 60), st.integers(1, 5), st.booleans())
    def test_backends_bit_identical(self, seed, n, d, ties):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 4, size=(n, d)).astype(float) if ties else rng.normal(size=(n, d))
        y = rng.integers(0, 3, size=n)
        target = rng.normal(size=n)
        samples = rng.choice(n, size=n, replace=True)
        feats = np.arange(d)
        py, cy = _splitter_py, splitter.BACKENDS["cython"]
        for min_leaf in (1, 3):
            a = py.best_split_gini(X, y, 3, samples, feats, min_leaf)
            b = cy.best_split_gini(X, y, 3, samples, feats, min_leaf)
            assert a[0] == b[0] and np.array_equal(a[1:], b[1:], equal_nan=True)
            a = py.best_split_mse(X, target, samples, feats, min_leaf)
            b = cy.best_split_mse(X, target, samples, feats, min_leaf)
            assert a[0] == b[0] and np.array_equal(a[1:], b[1:], equal_nan=True)

    def test_constant_feature_has_no_split(self):
        X = np.ones((5, 1))
        f, t, _ = _splitter_py.best_split_gini(X, np.array([0, 1, 0, 1, 0]), 2, np.arange(5), [0])
        assert f == -1 and np.isnan(t)

    def test_threshold_is_midpoint(self):
        X = np.array([[0.0], [1.0], [3.0], [4.0]])
        y = np.array([0, 0, 1, 1])
        assert splitter.best_split_gini(X, y, 2, np.arange(4), np.array([0]))[:2] == (0, 2.0)


class TestDecisionTree:
    def test_one_d_separable(self):
        X = np.arange(20, dtype=float)[:, None]
        y = (X[:, 0] > 7.5).astype(int)
        tree = DecisionTree().fit(X, y)
        assert (tree.predict(X) == y).all()
        assert tree.tree_.node_count == 3

    def test_unlimited_depth_memorises_distinct_points(self):
        X, y = blobs(0, noise=3.0)
        assert (DecisionTree().fit(X, y).predict(X) == y).all()

    def test_max_depth(self):
        X, y = blobs(1, noise=3.0)
        tree = DecisionTree(max_depth=1).fit(X, y)
        assert tree.tree_.node_count == 3

    def test_leaf_proba_is_class_frequency(self):
        X = np.zeros((5, 1))
        y = np.array([0, 0, 0, 1, 1])
        np.testing.assert_allclose(DecisionTree().fit(X, y).predict_proba(X[:1]), [[0.6, 0.4]])


class TestForest:
    def test_identical_trees_match_single_tree(self):
        X, y = blobs(2, noise=2.0)
        forest = RandomForest(n_trees=5, bootstrap=False, max_features=None).fit(X, y)
        tree = DecisionTree().fit(X, y)
        np.testing.assert_allclose(forest.predict_proba(X), tree.predict_proba(X), atol=1e-12)

    def test_ensemble_beats_single_tree_over_seeds(self):
        wins = 0
        for seed in range(10):
            X, y = blobs(100 + seed, n=300, d=8, noise=2.5)
            tr, te = slice(0, 200), slice(200, None)
            f_acc = (RandomForest(n_trees=30, seed=seed).fit(X[tr], y[tr]).predict(X[te]) == y[te]).mean()
            t_acc = (DecisionTree(seed=seed).fit(X[tr], y[tr]).predict(X[te]) == y[te]).mean()
            wins += f_acc >= t_acc
        # one-sided sign test: P(>= 8 of 10 | p = 0.5) ~ 0.055
        assert wins >= 8

    def test_trees_differ_with_bootstrap(self):
        X, y = blobs(3, noise=2.0)
        forest = RandomForest(n_trees=3).fit(X, y)
        assert forest.trees_[0].node_count != forest.trees_[1].node_count or not np.array_equal(
            forest.trees_[0].threshold, forest.trees_[1].threshold, equal_nan=True)


class TestKnn:
    def test_k1_train_accuracy(self):
        X, y = blobs(4, noise=3.0)
        assert (Knn(k=1).fit(X, y).predict(X) == y).all()

    def test_vote_tie_goes_to_lowest_class(self):
        X = np.array([[0.0], [1.0], [-1.0], [2.0]])
        y = np.array([1, 0, 1, 0])
        knn = Knn(k=2).fit(X, y)
        # nearest two to 0.5 are records 0 and 1 (one vote each)
        assert knn.predict(np.array([[0.5]])).tolist() == [0]

    def test_distance_tie_goes_to_earlier_record(self):
        X = np.array([[1.0], [-1.0], [5.0]])
        knn = Knn(k=1).fit(X, np.array([1, 0, 0]))
        assert knn.kneighbors(np.array([[0.0]])).tolist() == [[0]]

    def test_zscore_ignores_constant_column(self):
        X = np.column_stack([np.arange(6.0), np.full(6, 3.0)])
        knn = Knn(k=1).fit(X, np.arange(6) % 2)
        assert np.isfinite(knn.train_).all()


class TestSvm:
    def test_separable_binary(self):
        X, y = blobs(5, noise=0.3)
        assert (LinearSvm().fit(X, y).predict(X) == y).mean() == 1.0

    def test_ovr_multiclass(self):
        X, y = blobs(6, n=300, n_classes=5, noise=0.3)
        m = LinearSvm(n_epochs=20).fit(X, y)
        assert m.coef_.shape == (5, X.shape[1] + 1)
        assert (m.predict(X) == y).mean() > 0.9

    def test_no_proba(self):
        X, y = blobs(7)
        with pytest.raises(NotImplementedError):
            LinearSvm().fit(X, y).predict_proba(X)

    def test_larger_C_weaker_regularisation(self):
        X, y = blobs(8, noise=1.5)
        small = np.linalg.norm(LinearSvm(C=0.01).fit(X, y).coef_)
        big = np.linalg.norm(LinearSvm(C=100.0).fit(X, y).coef_)
        assert big > small


class TestBoosting:
    @pytest.mark.parametrize("n_classes", [2, 5])
    def test_loss_non_increasing(self, n_classes):
        X, y = blobs(9, n=300, n_classes=n_classes, noise=2.0)
        gb = GradientBoosting(n_rounds=100).fit(X, y)
        h = np.array(gb.loss_history_)
        assert h.size == 101
        assert np.all(np.diff(h) <= 0)
        assert h[-1] < h[0]

    def test_proba_matches_loss(self):
        X, y = blobs(10, noise=2.0)
        gb = GradientBoosting(n_rounds=20).fit(X, y)
        p = gb.predict_proba(X)
        assert -np.mean(np.log(p[np.arange(y.size), y])) == pytest.approx(gb.loss_history_[-1], rel=1e-9)


@pytest.mark.parametrize("name", sorted(MODELS))
class TestCommon:
    def test_empty_query(self, name):
        X, y = blobs(11)
        m = make_baseline(name, **FAST.get(name, {})).fit(X, y)
        assert m.predict(np.zeros((0, X.shape[1]))).tolist() == []
        assert m.predict([]).tolist() == []

    def test_dim_mismatch(self, name):
        X, y = blobs(12)
        m = make_baseline(name, **FAST.get(name, {})).fit(X, y)
        with pytest.raises(ShapeError):
            m.predict(X[:, :-1])

    def test_not_fitted(self, name):
        with pytest.raises(NotFittedError):
            make_baseline(name).predict(np.zeros((1, 3)))

    def test_empty_fit(self, name):
        with pytest.raises(DataError):
            make_baseline(name).fit(np.zeros((0, 3)), np.zeros(0, dtype=int))

    def test_reproducible(self, name):
        X, y = blobs(13, noise=2.0)
        a = make_baseline(name, **FAST.get(name, {})).fit(X, y)
        b = make_baseline(name, **FAST.get(name, {})).fit(X, y)
        sa, sb = a.get_state()[0], b.get_state()[0]
        assert sa.keys() == sb.keys()
        for k in sa:
            assert np.array_equal(sa[k], sb[k], equal_nan=True), k

    def test_checkpoint_round_trip(self, name, tmp_path):
        X, y = blobs(14, n_classes=3, noise=2.0)
        m = make_baseline(name, **FAST.get(name, {})).fit(X, y)
        save_baseline(m, tmp_path / "ckpt")
        back = load_baseline(tmp_path / "ckpt")
        assert type(back) is type(m)
        assert np.array_equal(back.predict(X), m.predict(X))
        if name != "svm":
            assert np.array_equal(back.predict_proba(X), m.predict_proba(X))

    def test_proba_rows_sum_to_one(self, name):
        if name == "svm":
            pytest.skip("margin only")
        X, y = blobs(15, n_classes=4, noise=2.0)
        p = make_baseline(name, **FAST.get(name, {})).fit(X, y).predict_proba(X)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
        assert (p >= 0).all()

    def test_sparse_input_matches_dense(self, name):
        X, y = blobs(16, noise=2.0)
        X[X < 0] = 0.0
        dense = make_baseline(name, **FAST.get(name, {})).fit(X, y).predict(X)
        sparse = make_baseline(name, **FAST.get(name, {})).fit(sp.csr_matrix(X), y).predict(sp.csr_matrix(X))
        assert np.array_equal(dense, sparse)


class TestSingleClass:
    @pytest.mark.parametrize("cls", [LinearSvm, GradientBoosting])
    def test_constant_predictor_with_warning(self, cls):
        X = np.random.default_rng(0).normal(size=(10, 3))
        with pytest.warns(UserWarning, match="single class"):
            m = cls().fit(X, np.ones(10, dtype=int))
        assert m.predict(X).tolist() == [1] * 10


class TestMisc:
    def test_unknown_model(self):
        with pytest.raises(ConfigError):
            make_baseline("rbf-svm")

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 15), st.integers(1, 30))
    def test_joint_dim_is_sum(self, n, dm, dt):
        meta = np.zeros((n, dm))
        text = sp.random(n, dt, density=0.3, format="csr", random_state=0)
        assert joint_features(meta, text).shape == (n, dm + dt)
        assert joint_features(meta, text.toarray()).shape == (n, dm + dt)

    def test_joint_row_mismatch(self):
        with pytest.raises(ShapeError):
            joint_features(np.zeros((2, 1)), np.zeros((3, 1)))

    def test_mlp_loss_decreases(self):
        X, y = blobs(17, noise=1.0)
        m = Mlp(n_epochs=5).fit(X, y)
        assert m.loss_history_[-1] < m.loss_history_[0]
        assert m.net_.hidden0.weight.shape == (X.shape[1], 256)
        assert m.net_.hidden1.weight.shape == (256, 128)


class TestMlpEarlyStopping:
    def noisy(self):
        # few points in many dims with flipped labels: training overfits fast
        rng = np.random.default_rng(0)
        X, y = rng.normal(size=(60, 40)), rng.integers(0, 2, size=60)
        Xv, yv = rng.normal(size=(40, 40)), rng.integers(0, 2, size=40)
        return X, y, Xv, yv

    def test_stops_and_keeps_best(self):
        X, y, Xv, yv = self.noisy()
        m = Mlp(hidden=(32,), lr=1e-2, n_epochs=30, patience=0).fit(X, y, validation=(Xv, yv))
        hist = m.val_loss_history_
        assert len(hist) < 30
        assert m.best_epoch_ == int(np.argmin(hist)) + 1
        assert hist[-1] >= hist[-2]
        assert m._loss(sp.csr_matrix(Xv), yv) == pytest.approx(min(hist), rel=1e-6)

    def test_without_validation_runs_all_epochs(self):
        X, y, _, _ = self.noisy()
        m = Mlp(hidden=(8,), n_epochs=4).fit(X, y)
        assert len(m.loss_history_) == 4 and m.val_loss_history_ == [] and m.best_epoch_ is None

    def test_validation_shape_checked(self):
        X, y, Xv, yv = self.noisy()
        with pytest.raises(ShapeError):
            Mlp(n_epochs=1).fit(X, y, validation=(Xv[:, :5], yv))
