import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nnfunctionals.diagnostics import ClassParams, KRangeWarning, derive_params, k_range
from nnfunctionals.functionals import Regularity


def _reference(d, a, beta, l1, l2, g, k1, k2, b1, b2):
    """Independent straight-line transcription of the derived parameters."""
    zeta = k1 / l1 + k2 / l2 + d * (k1 + k2) / a
    t1 = 1 - max(d / (2 * beta), d / (2 * min(2, beta) + d), d / (4 * b1), 1 / (2 * l1 * (1 - zeta)))
    t2 = 1 - max(d / (2 * beta), d / (2 * min(2, beta) + d), d / (4 * b2), 1 / (2 * l2 * (1 - zeta)))
    gs = (2 * a + d) * (1 + 2 * k2) / (2 * a + d - 2 * (a + d) * k1)
    g1 = 6 * k2 * (2 * a + d) / (3 * a + d - 6 * k1 * (a + d))
    g2 = 3 * (1 + 2 * k2) * (2 * a + d) / (2 * (4 * a + 3 * d - (1 + 3 * k1) * (a + d)))
    t1s = 1 - (3 * a + 3 * d) / (3 * a + 3 * d + (3 * a + d - 6 * k1 * (a + d)) * (1 - g1 / g))
    t2s = 1 - 1 / (1 + (1 + 2 * k2) * (g / g2 - 1))
    return zeta, t1, t2, gs, g1, g2, t1s, t2s


def _params(a=5.0, beta=2.0, lam=0.9, g=2.0, kappa=0.1, bstar=4.0):
    return ClassParams(a, beta, lam, lam, g, xi=Regularity(kappa, kappa, bstar, bstar, 2.0))


class TestDerived:
    def test_d1_example(self):
        dp = derive_params(1, _params())
        assert dp.zeta == pytest.approx(0.2622222, abs=1e-7)
        assert dp.tau1 == pytest.approx(0.2469880, abs=1e-7)
        assert dp.tau2 == dp.tau1

    def test_kappa_zero(self):
        dp = derive_params(2, _params(kappa=0.0))
        assert dp.gamma_star == pytest.approx(1.0)
        assert dp.gamma1_star == 0.0

    @given(
        st.integers(1, 6),
        st.floats(0.5, 20),
        st.floats(0.2, 5),
        st.floats(0.3, 5),
        st.floats(0.3, 5),
        st.floats(0.1, 10),
        st.floats(0.0, 0.2),
        st.floats(0.0, 0.2),
        st.floats(0.5, 8),
        st.floats(0.5, 8),
    )
    def test_transcription(self, d, a, beta, l1, l2, g, k1, k2, b1, b2):
        p = ClassParams(a, beta, l1, l2, g, xi=Regularity(k1, k2, b1, b2, 2.0))
        with np.errstate(all="ignore"):
            try:
                ref = _reference(d, a, beta, l1, l2, g, k1, k2, b1, b2)
            except ZeroDivisionError:
                return
        dp = derive_params(d, p)
        got = (dp.zeta, dp.tau1, dp.tau2, dp.gamma_star, dp.gamma1_star, dp.gamma2_star, dp.tau1_star, dp.tau2_star)
        for name, x, y in zip(("zeta", "tau1", "tau2", "g*", "g1*", "g2*", "t1*", "t2*"), got, ref):
            if x is None:
                continue
            assert x == pytest.approx(y, rel=1e-12, abs=1e-12), name

    def test_flags_monotone_in_gamma(self):
        lo = derive_params(2, _params(g=0.5)).hypothesis_flags
        hi = derive_params(2, _params(g=50.0)).hypothesis_flags
        for key in ("gamma>gamma*", "gamma>max(gamma1*,gamma2*)"):
            assert hi[key] >= lo[key]
        assert hi["gamma>gamma*"]

    def test_rows(self):
        rows = dict(derive_params(1, _params()).rows())
        assert rows["zeta<1/2"] == "true"
        assert float(rows["tau1"]) == pytest.approx(0.2469880, abs=1e-7)

    def test_zeta_ge_one_undefined(self):
        dp = derive_params(1, _params(a=0.3, kappa=0.2, lam=0.3))
        assert dp.zeta >= 1 and dp.tau1 is None
        assert dict(dp.rows())["tau1"] == "undefined"

    @pytest.mark.parametrize("field", ["alpha", "beta", "lambda1", "gamma", "C"])
    def test_invalid(self, field):
        kwargs = dict(alpha=1.0, beta=1.0, lambda1=1.0, lambda2=1.0, gamma=1.0, C=1.0)
        kwargs[field] = -1.0
        with pytest.raises(ValueError):
            ClassParams(**kwargs)


class TestKRange:
    def test_admissible(self):
        p = _params(a=50.0, beta=20.0, lam=20.0, kappa=0.0, bstar=8.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            xlo, xhi, ylo, yhi = k_range(1, p, 10 ** 4, 10 ** 4)
        tau = derive_params(1, p).tau1
        assert xlo == math.ceil(10 ** (4 / 8) * math.log(10 ** 4))
        assert xhi == math.floor(10 ** (4 * (tau - 0.01)))
        assert (ylo, yhi) == (xlo, xhi)

    def test_empty_warns(self):
        with pytest.warns(KRangeWarning):
            k_range(1, _params(), 1000, 1000)

    def test_nonpositive_tau(self):
        with pytest.raises(ValueError):
            k_range(4, _params(beta=0.5), 1000, 1000)

    def test_small_sizes(self):
        with pytest.raises(ValueError):
            k_range(1, _params(), 1, 10)
