import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from semiot.errors import DatasetError, DimensionError
from semiot.measures import (DiscreteMeasure, LatentSampler, PowerNorm,
                             SquaredEuclidean, cost_grad_x, cost_value,
                             load_dataset, make_cost, read_idx, write_idx)

finite = st.floats(-10, 10, allow_nan=False)


class TestDiscreteMeasure:
    def test_uniform_default(self):
        nu = DiscreteMeasure(np.zeros((4, 2)))
        assert_allclose(nu.weights, 0.25)
        assert nu.n == 4 and nu.dim == 2 and len(nu) == 4

    def test_arrays_are_read_only(self):
        nu = DiscreteMeasure([[0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(ValueError):
            nu.support[0, 0] = 5.0
        with pytest.raises(ValueError):
            nu.weights[0] = 1.0

    def test_input_is_copied(self):
        pts = np.zeros((2, 2))
        nu = DiscreteMeasure(pts)
        pts[0, 0] = 9.0
        assert nu.support[0, 0] == 0.0

    @pytest.mark.parametrize("weights", [[0.5, 0.6], [1.2, -0.2], [np.nan, 1.0]])
    def test_bad_weights(self, weights):
        with pytest.raises(ValueError):
            DiscreteMeasure([[0.0], [1.0]], weights)

    def test_weight_count_mismatch(self):
        with pytest.raises(DimensionError):
            DiscreteMeasure([[0.0], [1.0]], [1.0])

    def test_non_finite_support(self):
        with pytest.raises(ValueError):
            DiscreteMeasure([[np.inf, 0.0]])

    def test_weighted_mean(self):
        nu = DiscreteMeasure([[0.0, 0.0], [4.0, 2.0]], [0.75, 0.25])
        assert_allclose(nu.mean(), [1.0, 0.5])

    def test_zero_weight_log(self):
        nu = DiscreteMeasure([[0.0], [1.0]], [1.0, 0.0])
        assert nu.log_weights[1] == -np.inf


class TestCosts:
    @pytest.mark.parametrize("x, y, want", [
        ((0, 0), (0, 1), 1.0),
        ((3, 7), (3, 7), 0.0),
    ])
    def test_sqeuclid_value(self, x, y, want):
        assert cost_value(SquaredEuclidean(), x, y) == want

    def test_power1_value(self):
        assert_allclose(cost_value(PowerNorm(1), (0, 0), (3, 4)), 5.0)

    def test_sqeuclid_grad(self):
        c = SquaredEuclidean()
        assert_array_equal(cost_grad_x(c, (0, 0), (0, 1)), [0, -2])
        assert_array_equal(cost_grad_x(c, (2, 2), (2, 2)), [0, 0])

    def test_power1_kink(self):
        c = PowerNorm(1)
        assert_array_equal(c.grad_x([1.0, 1.0], [1.0, 1.0]), [0.0, 0.0])
        assert c.nonsmooth_at([1.0, 1.0], [1.0, 1.0])
        assert not c.nonsmooth_at([1.0, 0.0], [1.0, 1.0])
        assert not PowerNorm(2).nonsmooth_at([1.0, 1.0], [1.0, 1.0])

    def test_power_below_one_rejected(self):
        with pytest.raises(ValueError):
            PowerNorm(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            SquaredEuclidean().value([0.0, 0.0], [0.0, 0.0, 0.0])

    def test_power2_matches_sqeuclid(self):
        rng = np.random.default_rng(0)
        X, Y = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
        assert_allclose(PowerNorm(2).matrix(X, Y),
                        SquaredEuclidean().matrix(X, Y), rtol=1e-12)

    @pytest.mark.parametrize("cost", [SquaredEuclidean(), PowerNorm(1.5),
                                      PowerNorm(3.0)])
    def test_matrix_and_weighted_grad_match_pointwise(self, cost):
        rng = np.random.default_rng(1)
        X, Y = rng.normal(size=(6, 2)), rng.normal(size=(3, 2))
        C = cost.matrix(X, Y)
        for k in range(6):
            for i in range(3):
                assert_allclose(C[k, i], cost.value(X[k], Y[i]), rtol=1e-12)
        H = rng.dirichlet(np.ones(3), size=6)
        G = cost.weighted_grad_x(X, Y, H)
        want = np.array([sum(H[k, i] * cost.grad_x(X[k], Y[i])
                             for i in range(3)) for k in range(6)])
        assert_allclose(G, want, rtol=1e-10, atol=1e-12)

    def test_grad_against_finite_differences(self):
        # independent check: central differences of the value
        rng = np.random.default_rng(2)
        for cost in (SquaredEuclidean(), PowerNorm(2.5)):
            x, y = rng.normal(size=3), rng.normal(size=3)
            h = 1e-6
            fd = [(cost.value(x + h * e, y) - cost.value(x - h * e, y)) / (2 * h)
                  for e in np.eye(3)]
            assert_allclose(cost.grad_x(x, y), fd, rtol=1e-6)

    def test_make_cost(self):
        assert isinstance(make_cost("sqeuclidean"), SquaredEuclidean)
        assert make_cost("power", 3).p == 3.0
        with pytest.raises(ValueError):
            make_cost("cosine")

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite),
           arrays(float, 3, elements=finite))
    def test_lipschitz_on_box(self, x1, x2, y):
        # |c(x1,y) - c(x2,y)| <= 2D |x1 - x2| when all points lie in a box of diameter D
        c = SquaredEuclidean()
        D = np.sqrt(3) * 20.0
        lhs = abs(c.value(x1, y) - c.value(x2, y))
        assert lhs <= c.lipschitz_x(D) * np.linalg.norm(x1 - x2) + 1e-9


class TestLatentSampler:
    def test_dirac(self):
        s = LatentSampler.dirac([1.0, 2.0])
        assert s.is_deterministic
        assert_array_equal(s.sample(3), [[1.0, 2.0]] * 3)

    def test_streams_are_independent_of_history(self):
        s = LatentSampler.gaussian(2, seed=5)
        a = s.sample(4, stream_key=7)
        s.sample(100, stream_key=3)
        assert_array_equal(s.sample(4, stream_key=7), a)
        assert not np.array_equal(s.sample(4, stream_key=8), a)

    def test_seed_changes_draws(self):
        a = LatentSampler.gaussian(2, seed=0).sample(5, 1)
        b = LatentSampler.gaussian(2, seed=1).sample(5, 1)
        assert not np.array_equal(a, b)

    def test_uniform_bounds(self):
        X = LatentSampler.uniform(3, -1.0, 2.0).sample(500, 0)
        assert X.min() >= -1.0 and X.max() < 2.0

    def test_empirical_draws_from_points(self):
        pts = np.array([[0.0, 1.0], [5.0, 5.0]])
        X = LatentSampler.empirical(pts).sample(50, 0)
        assert all(any(np.array_equal(x, p) for p in pts) for x in X)

    def test_gaussian_moments(self):
        X = LatentSampler.gaussian(2, mean=[1.0, -1.0], std=2.0).sample(20000, 0)
        assert_allclose(X.mean(axis=0), [1.0, -1.0], atol=0.05)
        assert_allclose(X.std(axis=0), [2.0, 2.0], atol=0.05)

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError):
            LatentSampler.gaussian(2).sample(0)

    def test_round_trip_dict(self):
        s = LatentSampler.uniform(2, 0.0, 3.0, seed=4)
        t = LatentSampler.from_dict(s.to_dict())
        assert_array_equal(s.sample(5, 2), t.sample(5, 2))


class TestDatasets:
    def test_csv(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("0,0\n\n0,1\n")
        nu = load_dataset(p, "csv")
        assert_array_equal(nu.support, [[0, 0], [0, 1]])

    def test_csv_bad_cell_names_line(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("0,0\n1,x\n")
        with pytest.raises(DatasetError, match="line 2") as info:
            load_dataset(p, "csv")
        assert info.value.offset == 2

    def test_csv_ragged(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("0,0\n1\n")
        with pytest.raises(DatasetError):
            load_dataset(p, "csv")

    def test_csv_empty(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("\n")
        with pytest.raises(DatasetError):
            load_dataset(p, "csv")

    def test_idx_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        imgs = rng.integers(0, 256, (7, 28, 28), dtype=np.uint8)
        labels = rng.integers(0, 10, 7, dtype=np.uint8)
        write_idx(tmp_path / "i", imgs)
        write_idx(tmp_path / "l", labels)
        assert_array_equal(read_idx(tmp_path / "i"), imgs)
        assert_array_equal(read_idx(tmp_path / "l"), labels)

    def test_idx_gzip(self, tmp_path):
        import gzip
        imgs = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
        write_idx(tmp_path / "raw", imgs)
        (tmp_path / "z.gz").write_bytes(gzip.compress((tmp_path / "raw").read_bytes()))
        assert_array_equal(read_idx(tmp_path / "z.gz"), imgs)

    def test_idx_hand_built_header(self, tmp_path):
        # magic 0x00000803, dims 2 x 2 x 3, then 12 payload bytes
        raw = struct.pack(">IIII", 0x803, 2, 2, 3) + bytes(range(12))
        (tmp_path / "f").write_bytes(raw)
        arr = read_idx(tmp_path / "f")
        assert arr.shape == (2, 2, 3)
        assert_array_equal(arr.ravel(), np.arange(12))
        nu = load_dataset(tmp_path / "f", "idx")
        assert nu.support.shape == (2, 6)
        assert_allclose(nu.support[1, -1], 11 / 255)

    def test_idx_bad_magic(self, tmp_path):
        (tmp_path / "f").write_bytes(struct.pack(">II", 0x804, 1) + b"\0")
        with pytest.raises(DatasetError) as info:
            read_idx(tmp_path / "f")
        assert info.value.offset == 0

    def test_idx_truncated_payload(self, tmp_path):
        raw = struct.pack(">IIII", 0x803, 2, 2, 2) + bytes(5)
        (tmp_path / "f").write_bytes(raw)
        with pytest.raises(DatasetError, match="truncated") as info:
            read_idx(tmp_path / "f")
        assert info.value.offset == len(raw)

    def test_idx_truncated_header(self, tmp_path):
        (tmp_path / "f").write_bytes(struct.pack(">II", 0x803, 2))
        with pytest.raises(DatasetError, match="header"):
            read_idx(tmp_path / "f")

    def test_idx_trailing_bytes(self, tmp_path):
        raw = struct.pack(">II", 0x801, 2) + bytes(3)
        (tmp_path / "f").write_bytes(raw)
        with pytest.raises(DatasetError, match="trailing"):
            read_idx(tmp_path / "f")

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            load_dataset(tmp_path / "x", "hdf5")
