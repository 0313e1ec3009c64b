"""Nearest-neighbour point estimators of one- and two-sample functionals.

Two-sample estimators target T(f, g) = int f phi(f, g, x) dx from
X_1..X_m ~ f and Y_1..Y_n ~ g. The basic plug-in replaces f(X_i) and g(X_i)
by ``j / (N V_d rho_j^d)``, with rho_j the j-th neighbour distance of X_i
within X (self excluded, divisor m) or in Y (divisor n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Union

import numpy as np

from .errors import DomainError, SampleError
from .functionals import FunctionalSpec, OneSampleSpec, kl, renyi
from .geometry import KnnDistances, Sample, density_estimate, knn_cross, knn_within
from .special import digamma, log_gamma_ratio
from .weights import (
    WeightVector,
    default_order,
    solve_general_weights,
    solve_kl_weights,
    solve_renyi_weights,
)

__all__ = [
    "EstimatorConfig",
    "EstimateReport",
    "Geometry",
    "resolve_k",
    "auto_betas",
    "naive_estimate",
    "weighted_estimate",
    "kl_debiased_estimate",
    "renyi_debiased_estimate",
    "renyi_prefactor",
    "kl_shift",
    "one_sample_estimate",
    "oracle_estimate",
    "estimate",
]

KSpec = Union[int, Literal["auto"]]
WeightMode = Literal["unweighted", "general", "class"]

# Upper bound on rows * |J_X| * |J_Y| evaluated at once by the weighted path.
_CHUNK_CELLS = 2_000_000


def resolve_k(k: KSpec, size: int, beta_star: float, upper: int) -> int:
    """Resolve ``"auto"`` to ceil(size^(1/beta*) log size), clamped to [1, upper].

    ``beta_star = inf`` gives ceil(log size).
    """
    if isinstance(k, str):
        if k != "auto":
            raise ValueError(f"k must be a positive integer or 'auto', got {k!r}")
        raw = math.ceil(size ** (1.0 / beta_star) * math.log(size)) if size > 1 else 1
        return int(min(max(raw, 1), upper))
    k = int(k)
    if not 1 <= k <= upper:
        raise ValueError(f"k={k} outside 1..{upper}")
    return k


@dataclass(frozen=True)
class EstimatorConfig:
    """Neighbour counts and weighting scheme.

    ``weight_mode``: ``"unweighted"`` uses a single (kX, kY) cell;
    ``"general"`` combines naive estimates with general-class weights of
    orders ``order_x`` / ``order_y`` (defaults derived from beta1*, beta2*);
    ``"class"`` combines debiased estimates with the KL or Renyi class weights.
    ``debias`` only affects the unweighted mode.
    """

    kX: KSpec = "auto"
    kY: KSpec = "auto"
    weight_mode: WeightMode = "unweighted"
    c: float = 0.25
    debias: bool = False
    order_x: int | None = None
    order_y: int | None = None

    def __post_init__(self):
        if self.weight_mode not in ("unweighted", "general", "class"):
            raise ValueError(f"unknown weight_mode {self.weight_mode!r}")
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"c must lie in (0, 1), got {self.c}")

    def resolved(self, m: int, n: int | None, spec) -> EstimatorConfig:
        b1, b2 = auto_betas(spec, self.debias or self.weight_mode == "class")
        kx = resolve_k(self.kX, m, b1, m - 1)
        ky = resolve_k(self.kY, n, b2, n) if n is not None else None
        return replace(self, kX=kx, kY=ky)


def auto_betas(spec, debiased: bool) -> tuple[float, float]:
    """Smoothness orders fed to the auto-k rule.

    Debiased estimators remove every k^(-j) bias term exactly, so only the
    log factor of the lower bound remains and auto-k becomes ceil(log m).
    """
    if debiased:
        return math.inf, math.inf
    return spec.regularity.beta1, spec.regularity.beta2


@dataclass(frozen=True, eq=False)
class EstimateReport:
    """Point estimate with the per-point summands it averages."""

    value: float
    per_point_terms: np.ndarray
    estimator: str
    spec: str
    config_used: EstimatorConfig
    weights_used: tuple[WeightVector, WeightVector | None] | None = None
    notes: dict = field(default_factory=dict)


class Geometry:
    """Neighbour distances of X within X and of X into Y, computed once.

    Columns are sliced to give density estimates at any neighbour index up to
    the computed maximum.
    """

    def __init__(self, X: Sample, Y: Sample | None, kX: int, kY: int | None = None):
        if Y is not None and Y.d != X.d:
            raise SampleError(f"dimension mismatch: X has d={X.d}, Y has d={Y.d}")
        self.X = X
        self.Y = Y
        self.within: KnnDistances = knn_within(X, kX)
        self.cross: KnnDistances | None = knn_cross(X, Y, kY) if Y is not None else None

    @property
    def m(self) -> int:
        return self.X.m

    @property
    def n(self) -> int | None:
        return None if self.Y is None else self.Y.m

    @property
    def d(self) -> int:
        return self.X.d

    def fhat(self, j: int) -> np.ndarray:
        return density_estimate(self.within, self.m, self.d, j)

    def ghat(self, j: int) -> np.ndarray:
        return density_estimate(self.cross, self.n, self.d, j)

    def covers(self, kX: int, kY: int | None) -> bool:
        if self.within.k < kX:
            return False
        return kY is None or (self.cross is not None and self.cross.k >= kY)


def _geometry(X, Y, kX, kY, geometry: Geometry | None) -> Geometry:
    if geometry is not None and geometry.X is X and geometry.Y is Y and geometry.covers(kX, kY):
        return geometry
    return Geometry(X, Y, kX, kY)


def _check_two_sample(X: Sample, Y: Sample, kX: int, kY: int) -> None:
    if X.d != Y.d:
        raise SampleError(f"dimension mismatch: X has d={X.d}, Y has d={Y.d}")
    if not 1 <= kX <= X.m - 1:
        raise ValueError(f"kX={kX} outside 1..{X.m - 1}")
    if not 1 <= kY <= Y.m:
        raise ValueError(f"kY={kY} outside 1..{Y.m}")


def _mean(terms: np.ndarray) -> float:
    return float(np.mean(terms))


def naive_terms(geom: Geometry, spec: FunctionalSpec, kX: int, kY: int) -> np.ndarray:
    return spec.phi(geom.fhat(kX), geom.ghat(kY), geom.X.points)


def naive_estimate(
    X: Sample,
    Y: Sample,
    spec: FunctionalSpec,
    kX: int,
    kY: int,
    geometry: Geometry | None = None,
) -> EstimateReport:
    """Plug-in estimate (1/m) sum_i phi(f_hat_(kX),i, g_hat_(kY),i, X_i)."""
    _check_two_sample(X, Y, kX, kY)
    geom = _geometry(X, Y, kX, kY, geometry)
    terms = naive_terms(geom, spec, kX, kY)
    cfg = EstimatorConfig(kX=kX, kY=kY)
    return EstimateReport(_mean(terms), terms, "naive", spec.name, cfg)


def _double_weighted_terms(
    geom: Geometry,
    spec: FunctionalSpec,
    wx: WeightVector,
    wy: WeightVector,
    cell_factor=None,
) -> np.ndarray:
    """Per-point sum_{jX, jY} wX_jX wY_jY c(jX, jY) phi(f_hat_jX,i, g_hat_jY,i, X_i)."""
    jx = wx.support
    jy = wy.support
    ax = wx.w[jx - 1]
    ay = wy.w[jy - 1]
    F = np.column_stack([geom.fhat(j) for j in jx])
    G = np.column_stack([geom.ghat(j) for j in jy])
    coef = ax[:, None] * ay[None, :]
    if cell_factor is not None:
        coef = coef * cell_factor(jx, jy)
    m = geom.m
    if spec.kind == "KL" and cell_factor is None:
        # log(u/v) separates, so the double sum collapses to two single sums.
        return np.log(F) @ ax - np.log(G) @ ay
    rows = max(1, _CHUNK_CELLS // (len(jx) * len(jy)))
    out = np.empty(m)
    pts = geom.X.points
    for s in range(0, m, rows):
        sl = slice(s, s + rows)
        vals = spec.phi(F[sl, :, None], G[sl, None, :], pts[sl])
        out[sl] = np.einsum("iab,ab->i", vals, coef)
    return out


def _general_weights(k: int, d: int, order: int | None, beta: float, c: float) -> WeightVector:
    return solve_general_weights(k, d, default_order(beta) if order is None else order, c)


def weighted_estimate(
    X: Sample,
    Y: Sample,
    spec: FunctionalSpec,
    config: EstimatorConfig,
    geometry: Geometry | None = None,
    weights: tuple[WeightVector, WeightVector] | None = None,
) -> EstimateReport:
    """Double-weighted combination of naive estimates over (jX, jY).

    Weights default to the minimum-norm general-class members with orders
    ceil(floor(beta*)/2) from the functional's regularity, unless supplied.
    """
    cfg = config.resolved(X.m, Y.m, spec)
    kX, kY = cfg.kX, cfg.kY
    _check_two_sample(X, Y, kX, kY)
    if weights is None:
        wx = _general_weights(kX, X.d, cfg.order_x, spec.regularity.beta1, cfg.c)
        wy = _general_weights(kY, X.d, cfg.order_y, spec.regularity.beta2, cfg.c)
    else:
        wx, wy = weights
        if wx.k != kX or wy.k != kY:
            raise ValueError("weight lengths must equal (kX, kY)")
    geom = _geometry(X, Y, kX, kY, geometry)
    terms = _double_weighted_terms(geom, spec, wx, wy)
    return EstimateReport(_mean(terms), terms, "weighted", spec.name, replace(cfg, weight_mode="general"), (wx, wy))


def kl_shift(kX: int, kY: int) -> float:
    """Psi(kX) - log kX - Psi(kY) + log kY."""
    return digamma(kX) - math.log(kX) - digamma(kY) + math.log(kY)


def kl_debiased_estimate(
    X: Sample,
    Y: Sample,
    kX: KSpec = "auto",
    kY: KSpec = "auto",
    weighted: bool = False,
    c: float = 0.25,
    spec: FunctionalSpec | None = None,
    geometry: Geometry | None = None,
) -> EstimateReport:
    """Digamma-corrected KL estimate, optionally weighted over the KL class."""
    spec = spec or kl()
    if spec.kind != "KL":
        raise ValueError("kl_debiased_estimate needs a KL functional")
    cfg = EstimatorConfig(kX, kY, "class" if weighted else "unweighted", c, debias=True).resolved(X.m, Y.m, spec)
    kX, kY = cfg.kX, cfg.kY
    _check_two_sample(X, Y, kX, kY)
    geom = _geometry(X, Y, kX, kY, geometry)
    if not weighted:
        terms = naive_terms(geom, spec, kX, kY) + kl_shift(kX, kY)
        return EstimateReport(_mean(terms), terms, "kl-debiased", spec.name, cfg, notes={"shift": kl_shift(kX, kY)})
    wx = solve_kl_weights(kX, X.d, c)
    wy = solve_kl_weights(kY, X.d, c)
    jx, jy = wx.support, wy.support
    sx = float(np.dot(wx.w[jx - 1], digamma(jx) - np.log(jx)))
    sy = float(np.dot(wy.w[jy - 1], digamma(jy) - np.log(jy)))
    terms = _double_weighted_terms(geom, spec, wx, wy) + (sx - sy)
    return EstimateReport(_mean(terms), terms, "kl-debiased-weighted", spec.name, cfg, (wx, wy), {"shift": sx - sy})


def _check_kappa(kappa: float) -> None:
    if not kappa > 0.5:
        raise DomainError(
            f"kappa={kappa} not allowed: the Renyi debiasing bias guarantee requires kappa > 1/2"
        )


def renyi_prefactor(kappa: float, kX, kY):
    """kX^(1-kappa) Gamma(kX) kY^(kappa-1) Gamma(kY) / (Gamma(kX-kappa+1) Gamma(kY+kappa-1)).

    Vectorised over kX and kY (broadcast); evaluated in log-Gamma space.
    """
    kX = np.asarray(kX, dtype=float)
    kY = np.asarray(kY, dtype=float)
    if np.any(kX - kappa + 1 <= 0) or np.any(kY + kappa - 1 <= 0):
        raise DomainError(f"Gamma pole: need kX - kappa + 1 > 0 and kY + kappa - 1 > 0 (kappa={kappa})")
    logp = (
        (1 - kappa) * np.log(kX)
        + log_gamma_ratio(kX, kX - kappa + 1)
        + (kappa - 1) * np.log(kY)
        + log_gamma_ratio(kY, kY + kappa - 1)
    )
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def renyi_debiased_estimate(
    X: Sample,
    Y: Sample,
    kappa: float,
    kX: KSpec = "auto",
    kY: KSpec = "auto",
    weighted: bool = False,
    c: float = 0.25,
    geometry: Geometry | None = None,
) -> EstimateReport:
    """Gamma-prefactor debiased estimate of int f^kappa g^(1-kappa).

    The weighted form uses Renyi-class weights with shift kappa - 1 on the X
    side and 1 - kappa on the Y side. A Gamma pole at any weighted cell fails
    the whole estimate.
    """
    kappa = float(kappa)
    _check_kappa(kappa)
    spec = renyi(kappa)
    cfg = EstimatorConfig(kX, kY, "class" if weighted else "unweighted", c, debias=True).resolved(X.m, Y.m, spec)
    kX, kY = cfg.kX, cfg.kY
    _check_two_sample(X, Y, kX, kY)
    geom = _geometry(X, Y, kX, kY, geometry)
    if not weighted:
        pref = renyi_prefactor(kappa, kX, kY)
        terms = pref * naive_terms(geom, spec, kX, kY)
        return EstimateReport(_mean(terms), terms, "renyi-debiased", spec.name, cfg, notes={"prefactor": pref})
    wx = solve_renyi_weights(kX, X.d, kappa - 1.0, c)
    wy = solve_renyi_weights(kY, X.d, 1.0 - kappa, c)
    factor = lambda jx, jy: renyi_prefactor(kappa, jx[:, None], jy[None, :])  # noqa: E731
    terms = _double_weighted_terms(geom, spec, wx, wy, cell_factor=factor)
    return EstimateReport(_mean(terms), terms, "renyi-debiased-weighted", spec.name, cfg, (wx, wy))


def _one_sample_debias(spec: OneSampleSpec, j):
    """Per-index correction: additive for Shannon, multiplicative for Renyi entropy."""
    j = np.asarray(j, dtype=float)
    if spec.kind == "Shannon":
        return "add", np.log(j) - digamma(j)
    if spec.kind == "RenyiEntropy":
        kappa = spec.kappa
        if np.any(j - kappa + 1 <= 0):
            raise DomainError(f"Gamma pole: need k - kappa + 1 > 0 (kappa={kappa})")
        return "mul", np.exp((1 - kappa) * np.log(j) + log_gamma_ratio(j, j - kappa + 1))
    raise ValueError(f"no debiasing rule for {spec.kind}")


def one_sample_estimate(
    X: Sample,
    spec: OneSampleSpec,
    k: KSpec = "auto",
    debias: bool = False,
    weighted: bool = False,
    c: float = 0.25,
    order: int | None = None,
    geometry: Geometry | None = None,
) -> EstimateReport:
    """Estimate H(f) = int f psi(f) from one sample.

    With ``debias``, Shannon adds log k - Psi(k) and the Renyi integral is
    multiplied by k^(1-kappa) Gamma(k) / Gamma(k - kappa + 1). With
    ``weighted``, debiased estimates are combined over the KL class (Shannon)
    or the Renyi class with shift kappa - 1; without ``debias`` the general
    class of order ``order`` is used.
    """
    k = resolve_k(k, X.m, auto_betas(spec, debias)[0], X.m - 1)
    geom = _geometry(X, None, k, None, geometry)
    pts = X.points
    cfg = EstimatorConfig(k, None, "class" if (weighted and debias) else ("general" if weighted else "unweighted"), c, debias)
    if not weighted:
        terms = spec.psi(geom.fhat(k), pts)
        if debias:
            how, corr = _one_sample_debias(spec, k)
            terms = terms + corr if how == "add" else terms * corr
        return EstimateReport(_mean(terms), terms, "one-sample", spec.name, cfg)
    if debias:
        if spec.kind == "Shannon":
            w = solve_kl_weights(k, X.d, c)
        elif spec.kind == "RenyiEntropy":
            w = solve_renyi_weights(k, X.d, spec.kappa - 1.0, c)
        else:
            raise ValueError(f"no debiasing rule for {spec.kind}")
    else:
        w = _general_weights(k, X.d, order, spec.regularity.beta1, c)
    js = w.support
    terms = np.zeros(X.m)
    for j, wj in zip(js, w.w[js - 1]):
        t = spec.psi(geom.fhat(int(j)), pts)
        if debias:
            how, corr = _one_sample_debias(spec, int(j))
            t = t + corr if how == "add" else t * corr
        terms += wj * t
    return EstimateReport(_mean(terms), terms, "one-sample-weighted", spec.name, cfg, (w, None))


def oracle_estimate(X: Sample, model_f, spec, model_g=None) -> float:
    """Mean of phi(f(X_i), g(X_i), X_i) (or psi(f(X_i), X_i)) at the true densities."""
    pts = X.points
    fx = model_f.pdf(pts)
    if isinstance(spec, OneSampleSpec):
        if np.any(fx <= 0):
            raise DomainError("model density is zero at a sample point")
        return _mean(spec.psi(fx, pts))
    if model_g is None:
        raise ValueError("two-sample oracle needs the second density model")
    gx = model_g.pdf(pts)
    if np.any(fx <= 0) or np.any(gx <= 0):
        raise DomainError("model density is zero at a sample point")
    return _mean(spec.phi(fx, gx, pts))


def estimate(X: Sample, Y: Sample | None, spec, config: EstimatorConfig, geometry: Geometry | None = None) -> EstimateReport:
    """Dispatch on ``config.weight_mode`` (and the functional kind for ``"class"``)."""
    if isinstance(spec, OneSampleSpec):
        if Y is not None:
            raise ValueError(f"{spec.name} is a one-sample functional; do not pass Y")
        weighted = config.weight_mode != "unweighted"
        debias = config.debias or config.weight_mode == "class"
        return one_sample_estimate(X, spec, config.kX, debias, weighted, config.c, config.order_x, geometry)
    if Y is None:
        raise ValueError(f"{spec.name} is a two-sample functional; Y is required")
    mode = config.weight_mode
    if mode == "general":
        return weighted_estimate(X, Y, spec, config, geometry)
    if mode == "class" or config.debias:
        weighted = mode == "class"
        if spec.kind == "KL":
            return kl_debiased_estimate(X, Y, config.kX, config.kY, weighted, config.c, spec, geometry)
        if spec.kind == "Renyi":
            return renyi_debiased_estimate(X, Y, spec.kappa, config.kX, config.kY, weighted, config.c, geometry)
        raise ValueError(f"no class-specific weights or debiasing for {spec.name}; use weight_mode='general'")
    cfg = config.resolved(X.m, Y.m, spec)
    return naive_estimate(X, Y, spec, cfg.kX, cfg.kY, geometry)
