"""Catalogue of integrand functions phi(u, v, x) and psi(y, x).

``u`` stands for the density of the first sample at ``x`` and ``v`` for the
density of the second sample. Every callable is vectorised over ``u`` and
``v``; ``x`` is an ``(m, d)`` array or ``None`` and is ignored by the built-in
kinds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

__all__ = [
    "Regularity",
    "FunctionalSpec",
    "OneSampleSpec",
    "kl",
    "renyi",
    "intfg",
    "weighted_phi_divergence",
    "shannon",
    "renyi_entropy",
    "eval_phi",
    "eval_phi_grad",
    "eval_psi",
    "parse_functional",
]


@dataclass(frozen=True)
class Regularity:
    """Smoothness tags (kappa1, kappa2, beta1*, beta2*, L); used by diagnostics and auto-k only."""

    kappa1: float = 0.05
    kappa2: float = 0.05
    beta1: float = 4.0
    beta2: float = 4.0
    L: float = 2.0

    def __post_init__(self):
        if self.kappa1 < 0 or self.kappa2 < 0:
            raise ValueError("kappa1 and kappa2 must be non-negative")
        if self.beta1 <= 0 or self.beta2 <= 0:
            raise ValueError("beta1 and beta2 must be positive")
        if self.L <= 1:
            raise ValueError("L must exceed 1")

    @property
    def beta1_floor(self) -> int:
        """ceil(beta1) - 1, the number of derivatives in the first argument."""
        return int(np.ceil(self.beta1)) - 1

    @property
    def beta2_floor(self) -> int:
        return int(np.ceil(self.beta2)) - 1


Phi = Callable[[np.ndarray, np.ndarray, "np.ndarray | None"], np.ndarray]


@dataclass(frozen=True)
class FunctionalSpec:
    """A two-sample integrand phi with its partial derivatives in u and v."""

    name: str
    kind: str
    phi: Phi
    phi10: Phi
    phi01: Phi
    regularity: Regularity = field(default_factory=Regularity)
    kappa: float | None = None

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class OneSampleSpec:
    """A one-sample integrand psi(y, x) and its derivative in y."""

    name: str
    kind: str
    psi: Callable[[np.ndarray, "np.ndarray | None"], np.ndarray]
    psiprime: Callable[[np.ndarray, "np.ndarray | None"], np.ndarray]
    regularity: Regularity = field(default_factory=Regularity)
    kappa: float | None = None

    def __str__(self) -> str:
        return self.name


def kl(kappa1: float = 0.05, kappa2: float = 0.05) -> FunctionalSpec:
    """Kullback-Leibler integrand log(u / v)."""
    return FunctionalSpec(
        name="kl",
        kind="KL",
        phi=lambda u, v, x=None: np.log(u) - np.log(v),
        phi10=lambda u, v, x=None: 1.0 / u + 0.0 * v,
        phi01=lambda u, v, x=None: -1.0 / v + 0.0 * u,
        regularity=Regularity(kappa1, kappa2),
    )


def renyi(kappa: float) -> FunctionalSpec:
    """Renyi integrand (u / v)^(kappa - 1), whose integral against f is int f^kappa g^(1-kappa)."""
    kappa = float(kappa)
    e = kappa - 1.0
    return FunctionalSpec(
        name=f"renyi:{kappa:g}",
        kind="Renyi",
        phi=lambda u, v, x=None: (u / v) ** e,
        phi10=lambda u, v, x=None: e * u ** (e - 1.0) * v ** (-e),
        phi01=lambda u, v, x=None: -e * u ** e * v ** (-kappa),
        regularity=Regularity(max(-e, 0.0), max(e, 0.0)),
        kappa=kappa,
    )


def intfg() -> FunctionalSpec:
    """phi = v, so the functional is int f g."""
    return FunctionalSpec(
        name="intfg",
        kind="IntFG",
        phi=lambda u, v, x=None: np.zeros_like(u, dtype=float) + v,
        phi10=lambda u, v, x=None: np.zeros(np.broadcast(u, v).shape),
        phi01=lambda u, v, x=None: np.ones(np.broadcast(u, v).shape),
        regularity=Regularity(0.0, 0.0),
    )


def weighted_phi_divergence(
    weight: Callable[[np.ndarray], np.ndarray],
    varphi: Callable[[np.ndarray], np.ndarray],
    dvarphi: Callable[[np.ndarray], np.ndarray],
    name: str = "weighted-phi",
    regularity: Regularity | None = None,
) -> FunctionalSpec:
    """phi(u, v, x) = w(x) varphi(v / u).

    ``weight`` maps an ``(m, d)`` array of locations to ``m`` weights. The
    ratio-continuity requirement on ``w`` is the caller's responsibility.
    """

    def w_at(x, shape):
        if x is None:
            raise DomainError(f"{name} needs the evaluation points x")
        w = np.asarray(weight(np.atleast_2d(x)), dtype=float)
        return w.reshape(w.shape + (1,) * (len(shape) - w.ndim))

    def phi(u, v, x=None):
        r = v / u
        return w_at(x, np.shape(r)) * varphi(r)

    def phi10(u, v, x=None):
        r = v / u
        return w_at(x, np.shape(r)) * dvarphi(r) * (-r / u)

    def phi01(u, v, x=None):
        r = v / u
        return w_at(x, np.shape(r)) * dvarphi(r) / u

    return FunctionalSpec(name, "WeightedPhiDivergence", phi, phi10, phi01, regularity or Regularity())


def shannon() -> OneSampleSpec:
    """Shannon entropy, psi(y) = -log y."""
    return OneSampleSpec(
        name="shannon",
        kind="Shannon",
        psi=lambda y, x=None: -np.log(y),
        psiprime=lambda y, x=None: -1.0 / y,
        regularity=Regularity(0.05, 0.0),
    )


def renyi_entropy(kappa: float) -> OneSampleSpec:
    """Renyi integral int f^kappa, psi(y) = y^(kappa - 1)."""
    kappa = float(kappa)
    e = kappa - 1.0
    return OneSampleSpec(
        name=f"renyi-entropy:{kappa:g}",
        kind="RenyiEntropy",
        psi=lambda y, x=None: np.asarray(y, dtype=float) ** e,
        psiprime=lambda y, x=None: e * np.asarray(y, dtype=float) ** (e - 1.0),
        regularity=Regularity(max(-e, 0.0), 0.0),
        kappa=kappa,
    )


def _check_positive(u, v=None):
    if np.any(np.asarray(u) <= 0) or (v is not None and np.any(np.asarray(v) <= 0)):
        raise DomainError("density arguments must be strictly positive")


def eval_phi(spec: FunctionalSpec, u, v, x=None):
    _check_positive(u, v)
    out = spec.phi(np.asarray(u, dtype=float), np.asarray(v, dtype=float), x)
    return float(out) if np.ndim(out) == 0 else out


def eval_phi_grad(spec: FunctionalSpec, u, v, x=None):
    """Return (phi10, phi01) at (u, v, x)."""
    _check_positive(u, v)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d10 = spec.phi10(u, v, x)
    d01 = spec.phi01(u, v, x)
    if np.ndim(d10) == 0 and np.ndim(d01) == 0:
        return float(d10), float(d01)
    return d10, d01


def eval_psi(spec: OneSampleSpec, y, x=None):
    _check_positive(y)
    out = spec.psi(np.asarray(y, dtype=float), x)
    return float(out) if np.ndim(out) == 0 else out


def parse_functional(text: str) -> FunctionalSpec | OneSampleSpec:
    """Parse a CLI name: kl, renyi:<k>, intfg, shannon, renyi-entropy:<k>."""
    name, _, arg = text.strip().lower().partition(":")
    try:
        if name == "kl" and not arg:
            return kl()
        if name == "intfg" and not arg:
            return intfg()
        if name == "shannon" and not arg:
            return shannon()
        if name == "renyi" and arg:
            return renyi(float(arg))
        if name == "renyi-entropy" and arg:
            return renyi_entropy(float(arg))
    except ValueError as exc:
        raise ValueError(f"bad functional parameter in {text!r}: {exc}") from None
    raise ValueError(
        f"unknown functional {text!r}; expected kl, renyi:<kappa>, intfg, shannon or renyi-entropy:<kappa>"
    )
