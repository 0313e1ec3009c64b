"""Plug-in variance estimates and normal-theory confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .estimators import Geometry, _check_two_sample, _geometry
from .functionals import FunctionalSpec, OneSampleSpec
from .geometry import Sample

__all__ = [
    "VarianceReport",
    "ConfidenceInterval",
    "variance_estimate",
    "variance_estimate_one_sample",
    "confidence_interval",
    "normal_upper_quantile",
    "normal_cdf",
]


@dataclass(frozen=True)
class VarianceReport:
    """Estimates of the two efficiency constants and their raw components.

    ``components`` is (V11, V12, V21, V22): truncated second moments and first
    moments, so that v1hat = max(V11 - V12^2, 0) and v2hat = max(V21 - V22^2, 0).
    ``naive_value`` is the unweighted estimate entering V12.
    """

    v1hat: float
    v2hat: float
    components: tuple[float, float, float, float]
    truncation_level: float
    naive_value: float
    kX: int
    kY: int | None


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    half_width: float
    point: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_upper_quantile(p: float) -> float:
    """z with P(N(0,1) > z) = p, by Brent's method on erfc."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"tail probability must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    target = lambda z: 0.5 * math.erfc(z / math.sqrt(2.0)) - p  # noqa: E731
    # P(Z > 40) underflows to 0, so [-40, 40] brackets every representable p.
    return brentq(target, -40.0, 40.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def _truncation(m: int, n: int | None) -> float:
    return math.log(m) if n is None else min(math.log(m), math.log(n))


def variance_estimate(
    X: Sample,
    Y: Sample,
    spec: FunctionalSpec,
    kX: int,
    kY: int,
    geometry: Geometry | None = None,
) -> VarianceReport:
    """Truncated plug-in estimates of v1 = Var(phi + f phi10)(X) and v2 = Var(f phi01)(Y).

    All four averages run over X_1..X_m with f and g replaced by their
    (kX, kY) neighbour estimates; squared summands are capped at
    min(log m, log n).
    """
    _check_two_sample(X, Y, kX, kY)
    geom = _geometry(X, Y, kX, kY, geometry)
    f = geom.fhat(kX)
    g = geom.ghat(kY)
    pts = X.points
    phi = spec.phi(f, g, pts)
    f_phi10 = f * spec.phi10(f, g, pts)
    phi01 = spec.phi01(f, g, pts)
    cap = _truncation(X.m, Y.m)
    naive = float(np.mean(phi))
    v11 = float(np.mean(np.minimum((phi + f_phi10) ** 2, cap)))
    v12 = naive + float(np.mean(f_phi10))
    v21 = float(np.mean(np.minimum(f * g * phi01 ** 2, cap)))
    v22 = float(np.mean(g * phi01))
    return VarianceReport(
        v1hat=max(v11 - v12 ** 2, 0.0),
        v2hat=max(v21 - v22 ** 2, 0.0),
        components=(v11, v12, v21, v22),
        truncation_level=cap,
        naive_value=naive,
        kX=kX,
        kY=kY,
    )


def variance_estimate_one_sample(
    X: Sample, spec: OneSampleSpec, k: int, geometry: Geometry | None = None
) -> VarianceReport:
    """One-sample analogue: v1 = Var(psi + f psi')(X), capped at log m; v2 = 0."""
    if not 1 <= k <= X.m - 1:
        raise ValueError(f"k={k} outside 1..{X.m - 1}")
    geom = _geometry(X, None, k, None, geometry)
    f = geom.fhat(k)
    pts = X.points
    psi = spec.psi(f, pts)
    f_psi1 = f * spec.psiprime(f, pts)
    cap = _truncation(X.m, None)
    naive = float(np.mean(psi))
    v11 = float(np.mean(np.minimum((psi + f_psi1) ** 2, cap)))
    v12 = naive + float(np.mean(f_psi1))
    return VarianceReport(max(v11 - v12 ** 2, 0.0), 0.0, (v11, v12, 0.0, 0.0), cap, naive, k, None)


def confidence_interval(point: float, var: VarianceReport, m: int, n: int | None, q: float) -> ConfidenceInterval:
    """Interval point +/- z_{q/2} (v1hat/m + v2hat/n)^(1/2) with nominal level 1 - q."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    se2 = var.v1hat / m + (var.v2hat / n if n is not None else 0.0)
    half = normal_upper_quantile(q / 2.0) * math.sqrt(se2)
    return ConfidenceInterval(point - half, point + half, 1.0 - q, half, point)
