import json

import numpy as np
import pytest

from shinefs.data import (
    SecondOrderSpec,
    SynthSpec,
    cluster_sizes,
    load_multiview,
    read_matrix_csv,
    save_multiview,
    synth_generate,
    synth_second_order,
    zscore,
)
from shinefs.evaluation import accuracy, kmeans
from shinefs.model import MultiViewDataset, ValidationError


def write_csv(path, rows, header=None):
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(x)) for x in r) + "\n")


class TestLoader:
    def test_two_views(self, tmp_path, rng):
        write_csv(tmp_path / "a.csv", rng.standard_normal((10, 3)))
        write_csv(tmp_path / "b.csv", rng.standard_normal((10, 4)), header=["p", "q", "r", "s"])
        (tmp_path / "y.csv").write_text("label\n" + "\n".join(str(i % 2) for i in range(10)) + "\n")
        (tmp_path / "m.json").write_text(json.dumps({"views": ["a.csv", "b.csv"], "labels": "y.csv", "name": "t"}))
        ds = load_multiview(tmp_path / "m.json")
        assert ds.dims == (3, 4) and ds.n_samples == 10 and ds.name == "t"
        assert ds.feature_names[1] == ("p", "q", "r", "s")
        assert ds.feature_names[0][0] == "v0_f0"
        assert list(ds.labels) == [i % 2 for i in range(10)]

    def test_row_mismatch(self, tmp_path, rng):
        write_csv(tmp_path / "a.csv", rng.standard_normal((10, 3)))
        write_csv(tmp_path / "b.csv", rng.standard_normal((9, 3)))
        (tmp_path / "m.json").write_text(json.dumps({"views": ["a.csv", "b.csv"]}))
        with pytest.raises(ValidationError, match="shape mismatch"):
            load_multiview(tmp_path / "m.json")

    def test_missing_file(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps({"views": ["nope.csv"]}))
        with pytest.raises(ValidationError, match="missing file"):
            load_multiview(tmp_path / "m.json")

    def test_unparsable(self, tmp_path):
        (tmp_path / "a.csv").write_text("1,2\n3,x\n")
        with pytest.raises(ValidationError, match="unparsable"):
            read_matrix_csv(tmp_path / "a.csv")

    def test_string_labels(self, tmp_path, rng):
        write_csv(tmp_path / "a.csv", rng.standard_normal((4, 2)))
        (tmp_path / "y.csv").write_text("cat\ndog\ncat\nemu\n")
        (tmp_path / "m.json").write_text(json.dumps({"views": ["a.csv"], "labels": "y.csv"}))
        assert list(load_multiview(tmp_path / "m.json").labels) == [0, 1, 0, 2]

    def test_round_trip_bit_exact(self, tmp_path, rng):
        ds = MultiViewDataset(views=[rng.standard_normal((3, 7)) * 1e-7, rng.standard_normal((2, 7)) * 1e9],
                              labels=rng.integers(0, 3, 7), informative_features=[(0, 1)])
        back = load_multiview(save_multiview(ds, tmp_path))
        for a, b in zip(ds.views, back.views):
            assert np.array_equal(a, b)
        assert np.array_equal(ds.labels, back.labels)
        assert back.informative_features == ((0, 1),)


class TestZscore:
    def test_constant_feature(self, rng):
        X = rng.standard_normal((3, 20))
        X[1] = 5.0
        out, zero = zscore(MultiViewDataset(views=[X]))
        assert zero == ((0, 1),) and np.all(out.views[0][1] == 0)

    def test_moments(self, rng):
        X = 3 + 7 * rng.standard_normal((5, 40))
        X[4] = 1.0
        out, _ = zscore(MultiViewDataset(views=[X]))
        Z = out.views[0]
        assert np.all(np.abs(Z.mean(axis=1)) < 1e-12)
        sd = Z.std(axis=1)
        assert np.all((sd == 0) | (np.abs(sd - 1) < 1e-9))

    def test_idempotent(self, rng):
        ds = MultiViewDataset(views=[rng.standard_normal((4, 30)) * 5 + 2])
        once, _ = zscore(ds)
        twice, _ = zscore(once)
        np.testing.assert_allclose(once.views[0], twice.views[0], atol=1e-9)


class TestSynth:
    def test_separable(self):
        ds = synth_generate(SynthSpec(n=200, c_true=4, l=2, d_info=5, d_noise=0, separation=20, seed=1))
        run = kmeans(ds.concatenated(), 4, seed=0)
        assert accuracy(ds.labels, run.labels) > 0.99

    def test_deterministic(self):
        a = synth_generate(SynthSpec(seed=5))
        b = synth_generate(SynthSpec(seed=5))
        assert all(np.array_equal(x, y) for x, y in zip(a.views, b.views))
        assert np.array_equal(a.labels, b.labels)

    def test_variance_ranking_calibration(self):
        # the 20% highest-variance features should cover >= 80% of the planted ones
        fracs = []
        for seed in range(10):
            ds = synth_generate(SynthSpec(separation=6, d_info=5, d_noise=45, seed=seed))
            var = np.concatenate([X.var(axis=1) for X in ds.views])
            pairs = [(v, j) for v, d in enumerate(ds.dims) for j in range(d)]
            top = {pairs[i] for i in np.argsort(-var, kind="stable")[: int(0.2 * len(pairs))]}
            fracs.append(len(top & set(ds.informative_features)) / len(ds.informative_features))
        assert np.median(fracs) >= 0.8

    def test_informative_count_and_sizes(self):
        ds = synth_generate(SynthSpec(n=103, c_true=4, l=3, imbalance=3))
        assert len(ds.informative_features) == 15
        assert list(np.bincount(ds.labels)) == list(cluster_sizes(103, 4, 3))
        assert cluster_sizes(103, 4, 3).sum() == 103

    def test_second_order_shape(self):
        ds = synth_second_order(SecondOrderSpec(n=90, seed=2))
        assert ds.n_samples == 90 and ds.dims == (30, 30)
        assert len(set(ds.labels)) == 3

    def test_bad_spec(self):
        with pytest.raises(ValidationError):
            SynthSpec(n=5, c_true=4)
