"""Derived rate parameters and k-range guidance for a density class.

The class is described by (alpha, beta, lambda1, lambda2, gamma, C) together
with the functional smoothness tags (kappa1, kappa2, beta1*, beta2*, L). The
quantities here never affect an estimate; they flag when the hypotheses of
the asymptotic results fail and suggest admissible neighbour counts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .functionals import Regularity

__all__ = ["ClassParams", "DerivedParams", "KRangeWarning", "derive_params", "k_range", "K_RANGE_EPS"]

K_RANGE_EPS = 0.01


class KRangeWarning(UserWarning):
    """The suggested k-range is empty."""


@dataclass(frozen=True)
class ClassParams:
    alpha: float
    beta: float
    lambda1: float
    lambda2: float
    gamma: float
    C: float = 1.0
    xi: Regularity = field(default_factory=Regularity)

    def __post_init__(self):
        for name in ("alpha", "beta", "lambda1", "lambda2", "gamma", "C"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite real, got {v}")
        if not (self.xi.beta1 > 0 and self.xi.beta2 > 0):
            raise ValueError("beta1* and beta2* must be positive")


@dataclass(frozen=True)
class DerivedParams:
    """Rate parameters; ``None`` marks a quantity whose denominator vanishes."""

    zeta: float
    tau1: float | None
    tau2: float | None
    gamma_star: float | None
    gamma1_star: float | None
    gamma2_star: float | None
    tau1_star: float | None
    tau2_star: float | None
    hypothesis_flags: dict[str, bool]

    def rows(self) -> list[tuple[str, str]]:
        out = []
        for name in ("zeta", "tau1", "tau2", "gamma_star", "gamma1_star", "gamma2_star", "tau1_star", "tau2_star"):
            v = getattr(self, name)
            out.append((name, "undefined" if v is None else repr(float(v))))
        out.extend((k, str(v).lower()) for k, v in self.hypothesis_flags.items())
        return out


def _div(num: float, den: float) -> float | None:
    return None if den == 0 or not math.isfinite(den) else num / den


def _tau(d: int, beta: float, beta_star: float, lam: float, zeta: float) -> float | None:
    if zeta >= 1:
        return None
    return 1.0 - max(d / (2 * beta), d / (2 * min(2.0, beta) + d), d / (4 * beta_star), 1.0 / (2 * lam * (1 - zeta)))


def derive_params(d: int, params: ClassParams) -> DerivedParams:
    if d < 1:
        raise ValueError("d must be a positive integer")
    a, lam1, lam2, g = params.alpha, params.lambda1, params.lambda2, params.gamma
    k1, k2 = params.xi.kappa1, params.xi.kappa2
    b1s, b2s = params.xi.beta1, params.xi.beta2

    zeta = k1 / lam1 + k2 / lam2 + d * (k1 + k2) / a
    tau1 = _tau(d, params.beta, b1s, lam1, zeta)
    tau2 = _tau(d, params.beta, b2s, lam2, zeta)
    gamma_star = _div((2 * a + d) * (1 + 2 * k2), 2 * a + d - 2 * (a + d) * k1)
    gamma1_star = _div(6 * k2 * (2 * a + d), 3 * a + d - 6 * k1 * (a + d))
    gamma2_star = _div(3 * (1 + 2 * k2) * (2 * a + d), 2 * (4 * a + 3 * d - (1 + 3 * k1) * (a + d)))

    tau1_star = None
    if gamma1_star is not None:
        den = 3 * a + 3 * d + (3 * a + d - 6 * k1 * (a + d)) * (1 - gamma1_star / g)
        t = _div(3 * a + 3 * d, den)
        tau1_star = None if t is None else 1.0 - t
    tau2_star = None
    if gamma2_star is not None:
        t = _div(1.0, 1 + (1 + 2 * k2) * (g / gamma2_star - 1)) if gamma2_star != 0 else None
        tau2_star = None if t is None else 1.0 - t

    flags = {
        "zeta<1/2": zeta < 0.5,
        "tau1>1/beta1*": tau1 is not None and tau1 > 1.0 / b1s,
        "tau2>1/beta2*": tau2 is not None and tau2 > 1.0 / b2s,
        "gamma>gamma*": gamma_star is not None and gamma_star > 0 and g > gamma_star,
        "gamma>max(gamma1*,gamma2*)": (
            gamma1_star is not None
            and gamma2_star is not None
            and min(gamma1_star, gamma2_star) > 0
            and g > max(gamma1_star, gamma2_star)
        ),
    }
    return DerivedParams(zeta, tau1, tau2, gamma_star, gamma1_star, gamma2_star, tau1_star, tau2_star, flags)


def _one_range(size: int, beta_star: float, tau: float | None) -> tuple[int, int]:
    lo = math.ceil(size ** (1.0 / beta_star) * math.log(size))
    hi = math.floor(size ** (tau - K_RANGE_EPS)) if tau is not None else 0
    clamp = lambda k: int(min(max(k, 1), size - 1))  # noqa: E731
    return clamp(lo), clamp(hi)


def k_range(d: int, params: ClassParams, m: int, n: int) -> tuple[int, int, int, int]:
    """(kX_lo, kX_hi, kY_lo, kY_hi): lower ends ceil(N^(1/beta*) log N), upper ends floor(N^(tau - 0.01)).

    An empty range, including one caused by tau <= 1/beta*, is reported
    through :class:`KRangeWarning` and returned unchanged.
    """
    if m < 2 or n < 2:
        raise ValueError("need m, n >= 2")
    dp = derive_params(d, params)
    for name, tau in (("tau1", dp.tau1), ("tau2", dp.tau2)):
        if tau is None or tau <= 0:
            raise ValueError(f"{name} is not positive ({tau}); no admissible k-range")
    xlo, xhi = _one_range(m, params.xi.beta1, dp.tau1)
    ylo, yhi = _one_range(n, params.xi.beta2, dp.tau2)
    for side, lo, hi, flag in (("kX", xlo, xhi, "tau1>1/beta1*"), ("kY", ylo, yhi, "tau2>1/beta2*")):
        if lo > hi or not dp.hypothesis_flags[flag]:
            warnings.warn(
                f"{side} range is empty or violates {flag}: lo={lo}, hi={hi}", KRangeWarning, stacklevel=2
            )
    return xlo, xhi, ylo, yhi
