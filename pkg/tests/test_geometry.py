import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from nnfunctionals.errors import CoincidentPointsError, SampleError
from nnfunctionals.geometry import Sample, density_estimate, knn_brute, knn_cross, knn_within


class TestSample:
    def test_column_promotion(self):
        s = Sample([0.0, 1.0, 3.0])
        assert (s.m, s.d) == (3, 1)

    def test_read_only(self):
        s = Sample([[0.0, 1.0], [2.0, 3.0]])
        with pytest.raises(ValueError):
            s.points[0, 0] = 5.0

    def test_rejects_duplicates(self):
        with pytest.raises(CoincidentPointsError):
            Sample([[0.0, 1.0], [0.0, 1.0]])

    def test_allows_duplicates_on_request(self):
        assert Sample([1.0, 1.0], allow_duplicates=True).m == 2

    @pytest.mark.parametrize("bad", [[np.nan], [1.0, np.inf], np.zeros((2, 2, 2))])
    def test_rejects_malformed(self, bad):
        with pytest.raises(SampleError):
            Sample(bad)


class TestKnn:
    def test_within_example(self):
        d = knn_within(Sample([0.0, 1.0, 3.0]), 2)
        np.testing.assert_array_equal(d.dists, [[1, 3], [1, 2], [2, 3]])

    def test_cross_example(self):
        d = knn_cross(Sample([0.0]), Sample([1.0, -2.0]), 2)
        np.testing.assert_array_equal(d.dists, [[1, 2]])

    def test_cross_zero_distance_is_error_at_density_stage(self):
        X = Sample([0.0, 1.0])
        d = knn_cross(X, X, 1)
        with pytest.raises(CoincidentPointsError):
            density_estimate(d, 2, 1, 1)

    def test_k_bounds(self):
        X = Sample([0.0, 1.0, 2.0])
        with pytest.raises(ValueError):
            knn_within(X, 3)
        with pytest.raises(ValueError):
            knn_cross(X, X, 4)

    def test_high_dimension_uses_brute_force(self, rng):
        pts = rng.normal(size=(40, 20))
        got = knn_within(Sample(pts), 3).dists
        np.testing.assert_array_equal(got, knn_brute(pts, pts, 3, exclude_self=True))

    @given(
        hnp.arrays(np.float64, st.tuples(st.integers(3, 30), st.integers(1, 4)),
                   elements=st.floats(-10, 10, allow_nan=False), unique=True),
        st.integers(1, 5),
    )
    def test_within_matches_brute(self, pts, k):
        try:
            s = Sample(pts)
        except SampleError:
            return
        k = min(k, s.m - 1)
        try:
            got = knn_within(s, k).dists
        except CoincidentPointsError:
            return
        np.testing.assert_allclose(got, knn_brute(pts, pts, k, exclude_self=True), rtol=1e-12, atol=1e-12)

    def test_density_formula(self):
        d = knn_within(Sample([0.0, 1.0, 3.0]), 1)
        # j / (m V_1 rho) with V_1 = 2
        np.testing.assert_allclose(density_estimate(d, 3, 1, 1), [1 / 6, 1 / 6, 1 / 12])
