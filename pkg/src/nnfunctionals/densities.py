"""Analytic density models and reference values for functionals of them.

Models: axis-aligned Gaussians (diagonal covariance), uniform boxes and the
spherically symmetric Beta family C ||x||^(a-1) (1 - ||x||)^(b-1) on the unit
ball. :func:`truth` returns T, v1, v2 and sigma^2 by closed form where one is
registered, else by adaptive quadrature (d <= 2) or Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import betainc, betaincinv, betaln, gammaln

from .errors import DomainError
from .functionals import FunctionalSpec, OneSampleSpec
from .geometry import Sample
from .special import unit_ball_volume

__all__ = [
    "DensityModel",
    "Gaussian",
    "Uniform",
    "SphericalBeta",
    "TruthOracle",
    "sample",
    "pdf",
    "truth",
    "parse_model",
]


class DensityModel:
    """Interface: ``d``, ``pdf(x)``, ``draw(m, rng)`` and ``box()``."""

    d: int
    name: str

    def pdf(self, x) -> np.ndarray:
        raise NotImplementedError

    def draw(self, m: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def box(self) -> list[tuple[float, float]]:
        """Per-coordinate interval holding all but a negligible part of the mass."""
        raise NotImplementedError

    def breakpoints(self) -> list[float]:
        return []

    def sample(self, m: int, seed=0) -> Sample:
        if m < 1:
            raise ValueError(f"sample size must be positive, got {m}")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return Sample(self.draw(m, rng))

    def __str__(self) -> str:
        return self.name


def _vec(values, d: int | None = None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if d is not None and arr.size == 1 and d > 1:
        arr = np.full(d, float(arr[0]))
    return arr


def _points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, d) if d > 1 else x[:, None]
    if x.shape[-1] != d:
        raise ValueError(f"points have dimension {x.shape[-1]}, model has {d}")
    return x


@dataclass(frozen=True)
class Gaussian(DensityModel):
    mean: tuple
    var: tuple

    def __init__(self, mean, var):
        mean = _vec(mean)
        var = _vec(var, mean.size)
        if mean.size != var.size:
            raise ValueError("mean and variance lists differ in length")
        if np.any(var <= 0):
            raise ValueError("variances must be positive")
        object.__setattr__(self, "mean", tuple(mean))
        object.__setattr__(self, "var", tuple(var))

    @property
    def d(self) -> int:
        return len(self.mean)

    @property
    def name(self) -> str:
        return "gaussian:" + ",".join(f"{v:g}" for v in self.mean) + ":" + ",".join(f"{v:g}" for v in self.var)

    def logpdf(self, x) -> np.ndarray:
        x = _points(x, self.d)
        mu = np.array(self.mean)
        s = np.array(self.var)
        return -0.5 * np.sum((x - mu) ** 2 / s + np.log(2 * np.pi * s), axis=-1)

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def draw(self, m, rng):
        return np.array(self.mean) + np.sqrt(np.array(self.var)) * rng.standard_normal((m, self.d))

    def box(self):
        # Mass beyond 30 sd is below 1e-190; the pdf stays normal-range.
        return [(mu - 30 * math.sqrt(s), mu + 30 * math.sqrt(s)) for mu, s in zip(self.mean, self.var)]

    def breakpoints(self):
        return list(self.mean)


@dataclass(frozen=True)
class Uniform(DensityModel):
    lo: tuple
    hi: tuple

    def __init__(self, lo, hi):
        lo = _vec(lo)
        hi = _vec(hi, lo.size)
        if lo.size != hi.size or np.any(hi <= lo):
            raise ValueError("need lo < hi in every coordinate")
        object.__setattr__(self, "lo", tuple(lo))
        object.__setattr__(self, "hi", tuple(hi))

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.array(self.hi) - np.array(self.lo)))

    @property
    def name(self) -> str:
        return "uniform:" + ",".join(f"{v:g}" for v in self.lo) + ":" + ",".join(f"{v:g}" for v in self.hi)

    def pdf(self, x):
        x = _points(x, self.d)
        inside = np.all((x >= np.array(self.lo)) & (x <= np.array(self.hi)), axis=-1)
        return np.where(inside, 1.0 / self.volume, 0.0)

    def draw(self, m, rng):
        lo, hi = np.array(self.lo), np.array(self.hi)
        return lo + (hi - lo) * rng.random((m, self.d))

    def box(self):
        return list(zip(self.lo, self.hi))


@dataclass(frozen=True)
class SphericalBeta(DensityModel):
    """Density C ||x||^(a-1) (1 - ||x||)^(b-1) on the closed unit ball, a, b >= 1."""

    a: float
    b: float
    dim: int = 1

    def __post_init__(self):
        if self.a < 1 or self.b < 1:
            raise ValueError("spherical Beta needs a >= 1 and b >= 1")
        if self.dim < 1:
            raise ValueError("dimension must be positive")

    @property
    def d(self) -> int:
        return self.dim

    @property
    def name(self) -> str:
        return f"sphbeta:{self.a:g}:{self.b:g}:{self.dim}"

    @property
    def log_const(self) -> float:
        a, b, d = self.a, self.b, self.dim
        return (
            gammaln(a + b + d - 1)
            - math.log(d * unit_ball_volume(d))
            - gammaln(a + d - 1)
            - gammaln(b)
        )

    def radial_pdf(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = (r >= 0) & (r <= 1)
        rc = np.clip(r, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = math.exp(self.log_const) * rc ** (self.a - 1) * (1 - rc) ** (self.b - 1)
        return np.where(inside, val, 0.0)

    def pdf(self, x):
        x = _points(x, self.dim)
        return self.radial_pdf(np.linalg.norm(x, axis=-1))

    def draw(self, m, rng):
        # ||X|| has density proportional to r^(a+d-2) (1-r)^(b-1): invert its CDF.
        r = betaincinv(self.a + self.dim - 1, self.b, rng.random(m))
        if self.dim == 1:
            direction = np.where(rng.random(m) < 0.5, -1.0, 1.0)[:, None]
        else:
            z = rng.standard_normal((m, self.dim))
            direction = z / np.linalg.norm(z, axis=1, keepdims=True)
        return r[:, None] * direction

    def radius_cdf(self, r):
        return betainc(self.a + self.dim - 1, self.b, np.clip(r, 0.0, 1.0))

    def power_integral(self, p: float) -> float:
        """int f^p dx in closed form (requires d + p(a-1) > 0 and 1 + p(b-1) > 0)."""
        d = self.dim
        s, t = d + p * (self.a - 1), 1 + p * (self.b - 1)
        if s <= 0 or t <= 0:
            return math.inf
        return math.exp(p * self.log_const + math.log(d * unit_ball_volume(d)) + betaln(s, t))

    def box(self):
        return [(-1.0, 1.0)] * self.dim

    def breakpoints(self):
        return [0.0]


def sample(model: DensityModel, m: int, seed=0) -> Sample:
    return model.sample(m, seed)


def pdf(model: DensityModel, x):
    return model.pdf(x)


def parse_model(text: str) -> DensityModel:
    """Parse gaussian:<mean>:<var>, uniform:<lo>:<hi> or sphbeta:<a>:<b>[:<d>].

    Per-dimension lists are comma separated; a single value broadcasts.
    """
    parts = text.strip().split(":")
    kind = parts[0].lower()

    def floats(s):
        return [float(v) for v in s.split(",")]

    try:
        if kind == "gaussian" and len(parts) == 3:
            return Gaussian(floats(parts[1]), floats(parts[2]))
        if kind == "uniform" and len(parts) == 3:
            return Uniform(floats(parts[1]), floats(parts[2]))
        if kind == "sphbeta" and len(parts) in (3, 4):
            d = int(parts[3]) if len(parts) == 4 else 1
            return SphericalBeta(float(parts[1]), float(parts[2]), d)
    except ValueError as exc:
        raise ValueError(f"bad model {text!r}: {exc}") from None
    raise ValueError(f"unknown model {text!r}; expected gaussian:<mean>:<var>, uniform:<lo>:<hi> or sphbeta:<a>:<b>[:<d>]")


@dataclass(frozen=True)
class TruthOracle:
    """Reference values; ``se`` holds standard errors when the method is stochastic."""

    T_true: float
    v1_true: float
    v2_true: float
    sigma2_true: float
    method: str
    se: dict = field(default_factory=dict)
    seed: int | None = None


# -- integrand moments ---------------------------------------------------------
#
# Six moments determine everything:
#   X-side (weight f): phi, phi^2, B, B^2 with B = phi + f phi10
#   Y-side (weight g): D, D^2 with D = f phi01
# One-sample functionals have no Y side.


def _x_side(spec, fx, gx, pts):
    if isinstance(spec, OneSampleSpec):
        phi = spec.psi(fx, pts)
        B = phi + fx * spec.psiprime(fx, pts)
    else:
        phi = spec.phi(fx, gx, pts)
        B = phi + fx * spec.phi10(fx, gx, pts)
    return np.stack([phi, phi ** 2, B, B ** 2])


def _y_side(spec, fy, gy, pts):
    D = fy * spec.phi01(fy, gy, pts)
    return np.stack([D, D ** 2])


def _from_moments(xm, ym) -> tuple[float, float, float, float]:
    T = xm[0]
    sigma2 = xm[1] - xm[0] ** 2
    v1 = xm[3] - xm[2] ** 2
    v2 = 0.0 if ym is None else ym[1] - ym[0] ** 2
    return float(T), float(max(v1, 0.0)), float(max(v2, 0.0)), float(max(sigma2, 0.0))


def _closed_form(model_f, model_g, spec):
    if isinstance(spec, FunctionalSpec):
        if spec.kind == "KL" and isinstance(model_f, Gaussian) and isinstance(model_g, Gaussian):
            return _gaussian_kl(model_f, model_g)
        return None
    if spec.kind == "RenyiEntropy":
        kappa = spec.kappa
        if isinstance(model_f, Uniform):
            return model_f.volume ** (1 - kappa), 0.0, 0.0, 0.0
        if isinstance(model_f, SphericalBeta):
            H = model_f.power_integral(kappa)
            sigma2 = model_f.power_integral(2 * kappa - 1) - H ** 2
            return H, kappa ** 2 * sigma2, 0.0, sigma2
    if spec.kind == "Shannon":
        if isinstance(model_f, Gaussian):
            s = np.array(model_f.var)
            H = float(0.5 * np.sum(np.log(2 * np.pi * math.e * s)))
            return H, model_f.d / 2.0, 0.0, model_f.d / 2.0
        if isinstance(model_f, Uniform):
            return math.log(model_f.volume), 0.0, 0.0, 0.0
    return None


def _gaussian_kl(f: Gaussian, g: Gaussian):
    if f.d != g.d:
        raise ValueError("models differ in dimension")
    mf, sf = np.array(f.mean), np.array(f.var)
    mg, sg = np.array(g.mean), np.array(g.var)
    T = 0.5 * np.sum(sf / sg + (mf - mg) ** 2 / sg - 1 + np.log(sg / sf))
    # log f - log g = sum_k (a_k X_k^2 + b_k X_k) + const with X_k ~ N(mf_k, sf_k)
    a = 0.5 / sg - 0.5 / sf
    b = mf / sf - mg / sg
    var_log_ratio = np.sum((2 * a * mf + b) ** 2 * sf + 2 * a ** 2 * sf ** 2)
    # v2 = E_g[(f/g)^2] - 1 = int f^2/g - 1, Gaussian integral per coordinate
    A = 1 / sf - 0.5 / sg
    if np.any(A <= 0):
        v2 = math.inf
    else:
        B = 2 * mf / sf - mg / sg
        C = -mf ** 2 / sf + mg ** 2 / (2 * sg)
        log_int = np.sum(
            -np.log(2 * np.pi * sf) + 0.5 * np.log(2 * np.pi * sg) + 0.5 * np.log(np.pi / A) + B ** 2 / (4 * A) + C
        )
        v2 = math.exp(log_int) - 1.0
    return float(T), float(var_log_ratio), float(v2), float(var_log_ratio)


_TINY = np.finfo(float).tiny


def _quad_moments(side, model_w, other, spec, first: bool, tol: float):
    """Integrate weight * side-moments over the common support for d in {1, 2}."""
    d = model_w.d
    boxes = model_w.box() if other is None else [
        (max(l1, l2), min(h1, h2)) for (l1, h1), (l2, h2) in zip(model_w.box(), other.box())
    ]
    if any(lo >= hi for lo, hi in boxes):
        raise DomainError("supports do not overlap")
    bps = sorted(set(model_w.breakpoints() + ([] if other is None else other.breakpoints())))
    ncomp = 4 if first else 2

    def values(pts):
        fx = (model_w if first else other).pdf(pts)
        if other is None:
            gx = None
        else:
            gx = (other if first else model_w).pdf(pts)
        w = model_w.pdf(pts)
        # Subnormal densities overflow 1/f; their mass is negligible.
        keep = (fx > _TINY) & ((gx > _TINY) if gx is not None else True)
        out = np.zeros((ncomp, pts.shape[0]))
        if np.any(keep):
            kp = pts[keep]
            if first:
                out[:, keep] = side(spec, fx[keep], None if gx is None else gx[keep], kp) * w[keep]
            else:
                out[:, keep] = side(spec, fx[keep], gx[keep], kp) * w[keep]
        return out

    def integrate(fun, lo, hi):
        pts = [p for p in bps if lo < p < hi] or None
        res, err, info = quad_vec(fun, lo, hi, epsabs=tol, epsrel=tol, points=pts, limit=4000, full_output=True)
        if info.status != 0 or not np.all(np.isfinite(res)):
            raise DomainError("quadrature did not converge; the integrand may not be integrable")
        return res, err

    if d == 1:
        (lo, hi), = boxes
        return integrate(lambda t: values(np.array([[t]]))[:, 0], lo, hi)
    if d == 2:
        (lo1, hi1), (lo2, hi2) = boxes

        def inner(t):
            return integrate(lambda s: values(np.array([[t, s]]))[:, 0], lo2, hi2)[0]

        return integrate(inner, lo1, hi1)
    raise ValueError("quadrature is only available for d <= 2")


def _monte_carlo(model_f, model_g, spec, n_mc: int, seed: int):
    rng = np.random.default_rng(seed)
    X = model_f.draw(n_mc, rng)
    fx = model_f.pdf(X)
    gx = None if model_g is None else model_g.pdf(X)
    keep = fx > 0 if gx is None else (fx > 0) & (gx > 0)
    xs = np.zeros((4, n_mc))
    xs[:, keep] = _x_side(spec, fx[keep], None if gx is None else gx[keep], X[keep])
    se = {}
    xm = xs.mean(axis=1)
    se["T"] = float(xs[0].std(ddof=1) / math.sqrt(n_mc))
    se["sigma2"] = _var_se(xs[0], n_mc)
    se["v1"] = _var_se(xs[2], n_mc)
    ym = None
    if model_g is not None:
        Y = model_g.draw(n_mc, rng)
        fy, gy = model_f.pdf(Y), model_g.pdf(Y)
        keep = (fy > 0) & (gy > 0)
        ys = np.zeros((2, n_mc))
        ys[:, keep] = _y_side(spec, fy[keep], gy[keep], Y[keep])
        ym = ys.mean(axis=1)
        se["v2"] = _var_se(ys[0], n_mc)
    else:
        se["v2"] = 0.0
    return xm, ym, se


def _var_se(x: np.ndarray, n: int) -> float:
    c = x - x.mean()
    m2 = np.mean(c ** 2)
    m4 = np.mean(c ** 4)
    return float(math.sqrt(max(m4 - m2 ** 2, 0.0) / n))


def truth(
    model_f: DensityModel,
    model_g: DensityModel | None,
    spec: FunctionalSpec | OneSampleSpec,
    method: str = "auto",
    n_mc: int = 1_000_000,
    seed: int = 0,
    tol: float = 1e-10,
) -> TruthOracle:
    """Reference T, v1, v2 and sigma^2 = Var phi(f(X), g(X), X).

    ``method`` is ``"closed"``, ``"quadrature"``, ``"montecarlo"`` or
    ``"auto"`` (closed form, then quadrature for d <= 2, then Monte Carlo).
    Integrals run over the set where both densities are positive.
    """
    one_sample = isinstance(spec, OneSampleSpec)
    if not one_sample and model_g is None:
        raise ValueError("two-sample functional needs model_g")
    if model_g is not None and model_g.d != model_f.d:
        raise ValueError("models differ in dimension")
    g = None if one_sample else model_g
    if method in ("auto", "closed"):
        cf = _closed_form(model_f, g, spec)
        if cf is not None:
            return TruthOracle(*cf, method="closed")
        if method == "closed":
            raise ValueError(f"no closed form registered for {spec} under {model_f}")
        method = "quadrature" if model_f.d <= 2 else "montecarlo"
    if method == "quadrature":
        xm, xerr = _quad_moments(_x_side, model_f, g, spec, True, tol)
        ym, yerr = (None, None) if g is None else _quad_moments(_y_side, g, model_f, spec, False, tol)
        T, v1, v2, s2 = _from_moments(xm, ym)
        # quad_vec reports one max-norm error bound for the whole moment vector.
        se = {
            "T": float(xerr),
            "sigma2": float(xerr * (1 + 2 * abs(xm[0]))),
            "v1": float(xerr * (1 + 2 * abs(xm[2]))),
            "v2": 0.0 if ym is None else float(yerr * (1 + 2 * abs(ym[0]))),
        }
        return TruthOracle(T, v1, v2, s2, method="quadrature", se=se)
    if method == "montecarlo":
        xm, ym, se = _monte_carlo(model_f, g, spec, n_mc, seed)
        T, v1, v2, s2 = _from_moments(xm, ym)
        return TruthOracle(T, v1, v2, s2, method=f"montecarlo(N={n_mc})", se=se, seed=seed)
    raise ValueError(f"unknown method {method!r}")
