import string

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boostcal.dataset import (ConfigurationError, Dataset, FormatError,
                              InfeasibleSplitError, LabelCardinalityError,
                              ShapeError, SplitSpec, StratificationError,
                              binarize_multiclass, kfold_partition, load_dataset,
                              stratified_sample, stratified_split)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def _toy(n=100, n_pos=30, seed=0):
    rng = np.random.default_rng(seed)
    y = np.zeros(n, dtype=int)
    y[:n_pos] = 1
    return Dataset(rng.normal(size=(n, 3)), y, "toy")


class TestLoad:
    def test_csv_explicit_positive(self, tmp_path):
        p = _write(tmp_path, "d.csv", "x1,x2,cls\n1,2,a\n3,4,b\n5,6,a\n")
        d = load_dataset(p, "csv", "cls", positive_label="b")
        assert d.labels.tolist() == [0, 1, 0]
        assert d.features.tolist() == [[1, 2], [3, 4], [5, 6]]

    def test_csv_label_by_index_and_default_positive(self, tmp_path):
        p = _write(tmp_path, "d.csv", "y,x\nb,0.5\na,1.5\n")
        d = load_dataset(p, "csv", 0)
        # lexicographically larger label is positive by default
        assert d.labels.tolist() == [1, 0]

    def test_numeric_labels_use_numeric_order(self, tmp_path):
        p = _write(tmp_path, "d.csv", "x,y\n1,-1\n2,10\n3,9\n")
        with pytest.raises(LabelCardinalityError):
            load_dataset(p, "csv", "y")
        p = _write(tmp_path, "e.csv", "x,y\n1,9\n2,10\n3,9\n")
        assert load_dataset(p, "csv", "y").labels.tolist() == [0, 1, 0]

    def test_libsvm_sparse_to_dense(self, tmp_path):
        p = _write(tmp_path, "d.svm", "1 1:0.5 3:2.0\n-1 2:1\n")
        d = load_dataset(p, "libsvm", n_features=3)
        assert d.features[0].tolist() == [0.5, 0.0, 2.0]
        assert d.labels.tolist() == [1, 0]

    def test_libsvm_width_from_max_index(self, tmp_path):
        p = _write(tmp_path, "d.svm", "0 2:1\n1 5:1\n")
        assert load_dataset(p, "libsvm").n_features == 5

    def test_three_labels_rejected(self, tmp_path):
        p = _write(tmp_path, "d.csv", "x,y\n1,0\n2,1\n3,2\n")
        with pytest.raises(LabelCardinalityError):
            load_dataset(p, "csv", "y")

    def test_ragged_rows(self, tmp_path):
        p = _write(tmp_path, "d.csv", "x1,x2,y\n1,2,0\n3,1\n")
        with pytest.raises(ShapeError, match="line 3"):
            load_dataset(p, "csv", "y")

    def test_parse_error_has_line_number(self, tmp_path):
        p = _write(tmp_path, "d.csv", "x,y\n1,0\nfoo,1\n")
        with pytest.raises(FormatError) as exc:
            load_dataset(p, "csv", "y")
        assert exc.value.line == 3

    def test_missing_value_rejected(self, tmp_path):
        p = _write(tmp_path, "d.csv", "x,y\n1,0\n,1\n")
        with pytest.raises(FormatError, match="missing"):
            load_dataset(p, "csv", "y")

    def test_libsvm_bad_index_order(self, tmp_path):
        p = _write(tmp_path, "d.svm", "1 3:1 2:1\n")
        with pytest.raises(FormatError, match="line 1"):
            load_dataset(p, "libsvm")

    def test_load_twice_identical(self, tmp_path):
        p = _write(tmp_path, "d.csv", "x,y\n0.1,0\n0.30000000000000004,1\n")
        a, b = load_dataset(p, "csv", "y"), load_dataset(p, "csv", "y")
        assert a.features.tobytes() == b.features.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_dataset_is_read_only(self):
        d = _toy()
        with pytest.raises(ValueError):
            d.features[0, 0] = 1.0


class TestBinarize:
    def test_modal_class(self):
        assert binarize_multiclass(list("ABBC")).tolist() == [0, 1, 1, 0]

    def test_letters_first_half_positive(self):
        letters = list(string.ascii_uppercase)
        out = binarize_multiclass(letters, "explicit", letters[:13])
        assert out.tolist() == [1] * 13 + [0] * 13

    def test_modal_tie_goes_to_smaller_label(self):
        assert binarize_multiclass(list("BBAAC")).tolist() == [0, 0, 1, 1, 0]

    def test_empty_or_disjoint_positive_set(self):
        with pytest.raises(ConfigurationError):
            binarize_multiclass(list("AB"), "explicit", [])
        with pytest.raises(ConfigurationError):
            binarize_multiclass(list("AB"), "explicit", ["Z"])

    @given(st.lists(st.sampled_from("ABCD"), min_size=2, max_size=30), st.randoms())
    def test_order_independent(self, labels, rnd):
        if len(set(labels)) < 2:
            return
        perm = list(range(len(labels)))
        rnd.shuffle(perm)
        out = binarize_multiclass(labels)
        out_perm = binarize_multiclass([labels[i] for i in perm])
        assert out_perm.tolist() == [out[i] for i in perm]


class TestSplit:
    def test_stratified_counts(self):
        train, cal, test = stratified_split(_toy(), SplitSpec(0.5, 0, seed=3))
        assert len(train) == 50 and len(cal) == 0 and len(test) == 50
        assert abs(train.n_positive - 15) <= 1

    def test_deterministic(self):
        a = stratified_split(_toy(), SplitSpec(0.5, 20, seed=7))
        b = stratified_split(_toy(), SplitSpec(0.5, 20, seed=7))
        for x, y in zip(a, b):
            assert x.features.tobytes() == y.features.tobytes()

    def test_calibration_takes_everything(self):
        with pytest.raises(InfeasibleSplitError):
            stratified_split(_toy(), SplitSpec(0.5, 100))

    def test_single_class_part(self):
        d = _toy(n=10, n_pos=1)
        with pytest.raises(StratificationError):
            stratified_split(d, SplitSpec(0.5, 0))

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(20, 200), frac=st.floats(0.2, 0.8),
           cal=st.just(0) | st.integers(2, 10), seed=st.integers(0, 2 ** 32))
    def test_parts_disjoint_and_proportional(self, n, frac, cal, seed):
        n_pos = n // 2
        rng = np.random.default_rng(seed)
        # unique row ids in column 0 identify examples
        X = np.column_stack([np.arange(n), rng.normal(size=n)])
        y = np.r_[np.ones(n_pos, int), np.zeros(n - n_pos, int)]
        d = Dataset(X, y)
        parts = stratified_split(d, SplitSpec(frac, cal, seed))
        ids = [set(p.features[:, 0].tolist()) for p in parts]
        assert sum(len(s) for s in ids) == n
        assert set().union(*ids) == set(range(n))
        for p in parts:
            if len(p):
                assert abs(p.n_positive - len(p) * n_pos / n) <= 1.0 + 1e-9

    def test_stratified_sample(self):
        d = _toy()
        idx = stratified_sample(d, 20, seed=1)
        assert len(set(idx.tolist())) == 20
        assert d.labels[idx].sum() == 6


class TestKFold:
    def test_even_sizes(self):
        d = _toy(n=9, n_pos=3)
        assert kfold_partition(d, 3).sizes() == [3, 3, 3]

    def test_remainder(self):
        d = _toy(n=10, n_pos=4)
        assert sorted(kfold_partition(d, 3).sizes()) == [3, 3, 4]

    def test_default_three_folds(self):
        assert kfold_partition(_toy()).n_folds == 3

    def test_too_many_folds(self):
        with pytest.raises(InfeasibleSplitError):
            kfold_partition(_toy(n=5, n_pos=2), 6)

    def test_deterministic(self):
        a = kfold_partition(_toy(), 3, seed=11).assignment
        b = kfold_partition(_toy(), 3, seed=11).assignment
        assert a.tobytes() == b.tobytes()

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(4, 120), c=st.integers(2, 8), seed=st.integers(0, 1000))
    def test_every_example_once_and_balanced(self, n, c, seed):
        if c > n:
            return
        y = np.r_[np.ones(n // 3, int), np.zeros(n - n // 3, int)]
        d = Dataset(np.zeros((n, 1)), y)
        part = kfold_partition(d, c, seed)
        folds = [part.fold(k) for k in range(c)]
        assert sorted(np.concatenate(folds).tolist()) == list(range(n))
        sizes = [f.size for f in folds]
        assert max(sizes) - min(sizes) <= 1 and min(sizes) > 0
        pos = [int(y[f].sum()) for f in folds]
        assert max(pos) - min(pos) <= 1
