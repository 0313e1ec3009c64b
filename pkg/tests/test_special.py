import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from nnfunctionals.special import EULER_GAMMA, digamma, log_gamma_ratio, unit_ball_volume


class TestDigamma:
    def test_at_one(self):
        assert digamma(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-15)

    @pytest.mark.parametrize("x", [1e-3, 0.1, 0.5, 1.0, 2.5, 5.9, 6.0, 7.3, 50.0, 1e4, 1e8])
    def test_against_high_precision(self, x):
        with mpmath.workdps(40):
            ref = float(mpmath.digamma(mpmath.mpf(x)))
        assert digamma(x) == pytest.approx(ref, rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("x", [-0.5, -1.5, -2.25])
    def test_negative_non_integers(self, x):
        with mpmath.workdps(40):
            ref = float(mpmath.digamma(mpmath.mpf(x)))
        assert digamma(x) == pytest.approx(ref, rel=1e-11)

    def test_integer_values_harmonic(self):
        for k in range(1, 40):
            harmonic = sum(1.0 / j for j in range(1, k))
            assert digamma(k) == pytest.approx(harmonic - EULER_GAMMA, abs=1e-13)

    def test_vectorised_shape(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = digamma(x)
        assert out.shape == (2, 2)
        assert out[1, 1] == pytest.approx(digamma(4.0))

    @given(st.floats(min_value=1e-3, max_value=1e6))
    def test_recurrence(self, x):
        assert digamma(x + 1) - digamma(x) == pytest.approx(1.0 / x, rel=1e-10, abs=1e-12)


class TestGammaHelpers:
    def test_log_gamma_ratio(self):
        assert log_gamma_ratio(5.0, 3.0) == pytest.approx(math.log(24.0 / 2.0))

    def test_log_gamma_ratio_rejects_poles(self):
        with pytest.raises(ValueError):
            log_gamma_ratio(0.0, 1.0)

    @pytest.mark.parametrize("d,vol", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)])
    def test_unit_ball(self, d, vol):
        assert unit_ball_volume(d) == pytest.approx(vol, rel=1e-15)
