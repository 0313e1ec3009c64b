import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gammaln

from nnfunctionals.errors import DomainError, WeightInfeasibleError
from nnfunctionals.weights import (
    WeightNormWarning,
    allowed_indices,
    default_order,
    solve_general_weights,
    solve_kl_weights,
    solve_renyi_weights,
)


def _general_rows(k, d, order, c):
    j = allowed_indices(k, c).astype(float)
    rows = [np.ones_like(j)]
    for l in range(math.ceil(d / 2)):
        for i in range(order + 1):
            if (l, i) != (0, 0):
                rows.append(j ** (2 * l / d - i))
    return j, np.array(rows)


class TestExamples:
    def test_two_uniform(self):
        np.testing.assert_allclose(solve_general_weights(2, 1, 0, 0.4).w, [0.5, 0.5], atol=1e-15)

    def test_single(self):
        np.testing.assert_allclose(solve_general_weights(1, 1, 0, 0.5).w, [1.0])

    def test_d3_against_pseudoinverse(self):
        wv = solve_general_weights(4, 3, 0, 0.2)
        j, A = _general_rows(4, 3, 0, 0.2)
        ref = np.linalg.pinv(A) @ np.array([1.0, 0.0])
        np.testing.assert_allclose(wv.w[j.astype(int) - 1], ref, atol=1e-10)
        assert np.max(np.abs(wv.residuals())) <= 1e-10

    def test_zero_below_ck(self):
        wv = solve_general_weights(20, 1, 2, 0.25)
        assert np.all(wv.w[:4] == 0)
        assert wv.support.min() >= 5

    def test_renyi_zero_shift_equals_kl(self):
        np.testing.assert_array_equal(solve_renyi_weights(30, 5, 0.0).w, solve_kl_weights(30, 5).w)

    def test_kl_d_le_2_is_uniform(self):
        wv = solve_kl_weights(8, 2, 0.25)
        np.testing.assert_allclose(wv.w[1:], np.full(7, 1 / 7))

    def test_default_order(self):
        assert default_order(4) == 2
        assert default_order(2.5) == 1
        assert default_order(1) == 0


class TestErrors:
    def test_deficit_named(self):
        with pytest.raises(WeightInfeasibleError, match="deficit 2"):
            solve_general_weights(2, 1, 3, 0.25)

    def test_gamma_pole(self):
        with pytest.raises(DomainError, match="Gamma pole"):
            solve_renyi_weights(4, 1, 1.5, 0.25)

    def test_norm_warning(self):
        with pytest.warns(WeightNormWarning):
            solve_general_weights(51, 1, 2, 0.25)

    @pytest.mark.parametrize("c", [0.0, 1.0, -0.1])
    def test_bad_c(self, c):
        with pytest.raises(ValueError):
            allowed_indices(5, c)


class TestProperties:
    @given(st.integers(1, 60), st.integers(1, 8), st.integers(0, 3), st.sampled_from([0.1, 0.25, 0.5]))
    def test_general_residuals_and_min_norm(self, k, d, order, c):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                wv = solve_general_weights(k, d, order, c)
        except WeightInfeasibleError:
            return
        assert np.max(np.abs(wv.residuals())) <= 1e-8
        j, A = _general_rows(k, d, order, c)
        w = wv.w[j.astype(int) - 1]
        if wv.l1_norm > 1e3:
            return
        # Minimum norm: the solution lies in the row space of the constraint matrix.
        proj = A.T @ np.linalg.lstsq(A.T, w, rcond=None)[0]
        assert np.max(np.abs(proj - w)) <= 1e-6 * max(1.0, np.abs(w).max())

    @given(st.integers(4, 80), st.integers(1, 8), st.floats(-0.45, 0.45))
    def test_renyi_constraints(self, k, d, b):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                wv = solve_renyi_weights(k, d, b, 0.25)
        except (WeightInfeasibleError, DomainError):
            return
        j = wv.support.astype(float) - b
        w = wv.w[wv.support - 1]
        for l in range(1, math.ceil(d / 2)):
            moment = np.exp(gammaln(j + 2 * l / d) - gammaln(j))
            assert abs(moment @ w) <= 1e-8 * np.abs(moment).max() * max(1.0, np.abs(w).sum())
