"""Bias-cancelling weight vectors over neighbour indices 1..k.

Each weight class is the affine set {w : A w = e1, w_j = 0 for j < c k}; we
return its minimum Euclidean norm element. Rows of A are scaled to unit norm
and the system is solved through a QR factorisation of A^T restricted to the
allowed indices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, WeightInfeasibleError

__all__ = [
    "WeightVector",
    "WeightNormWarning",
    "solve_general_weights",
    "solve_kl_weights",
    "solve_renyi_weights",
    "allowed_indices",
    "default_order",
    "RESIDUAL_TOL",
]

# Relative size of the smallest R diagonal below which the system is declared singular.
_RCOND = 1e-12
# Largest scaled constraint residual a returned weight vector may carry.
RESIDUAL_TOL = 1e-8


class WeightNormWarning(UserWarning):
    """||w||_1 exceeds 1/c."""


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Weights w_1..w_k, plus the scaled constraint system they satisfy."""

    w: np.ndarray
    k: int
    classkind: str
    d: int
    c: float
    order: int | None = None
    b: float | None = None
    constraints: np.ndarray | None = None
    rhs: np.ndarray | None = None

    @property
    def support(self) -> np.ndarray:
        """1-based indices j with w_j != 0."""
        return np.flatnonzero(self.w) + 1

    @property
    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.w)))

    @property
    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.w))

    def residuals(self) -> np.ndarray:
        """Unit-norm constraint rows dotted with w, minus their right-hand sides."""
        if self.constraints is None:
            return np.zeros(0)
        return self.constraints @ self.w - self.rhs

    def describe(self) -> str:
        extra = []
        if self.order is not None:
            extra.append(f"I={self.order}")
        if self.b is not None:
            extra.append(f"b={self.b:g}")
        extra.append(f"d={self.d}")
        extra.append(f"c={self.c:g}")
        return f"{self.classkind}(k={self.k}, {', '.join(extra)})"


def allowed_indices(k: int, c: float) -> np.ndarray:
    """Indices j in 1..k with j >= c k (a 1e-9 slack absorbs rounding in c k)."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if not 0.0 < c < 1.0:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    lo = max(1, math.ceil(c * k - 1e-9))
    return np.arange(lo, k + 1)


def default_order(beta_star: float) -> int:
    """ceil(floor_beta / 2), with floor_beta = ceil(beta_star) - 1."""
    return math.ceil((math.ceil(beta_star) - 1) / 2)


def _min_norm(A: np.ndarray, rhs: np.ndarray, k: int, j_allowed: np.ndarray, label: str):
    p, q = A.shape
    if p > q:
        raise WeightInfeasibleError(
            f"{label}: {p} constraints but only {q} allowed indices "
            f"(deficit {p - q}); increase k or decrease c"
        )
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise WeightInfeasibleError(f"{label}: degenerate constraint row")
    A = A / norms[:, None]
    rhs = rhs / norms
    Q, R = np.linalg.qr(A.T)
    diag = np.abs(np.diag(R))
    if diag.min() <= _RCOND * diag.max():
        raise WeightInfeasibleError(
            f"{label}: constraint matrix is numerically singular; try a larger k"
        )
    w_allowed = Q @ np.linalg.solve(R.T, rhs)
    # One step of iterative refinement against the scaled system.
    w_allowed += Q @ np.linalg.solve(R.T, rhs - A @ w_allowed)
    w = np.zeros(k)
    w[j_allowed - 1] = w_allowed
    full = np.zeros((p, k))
    full[:, j_allowed - 1] = A
    # Same arithmetic as WeightVector.residuals, so the bound holds for what callers see.
    resid = float(np.max(np.abs(full @ w - rhs)))
    if not resid <= RESIDUAL_TOL:
        raise WeightInfeasibleError(
            f"{label}: constraint residual {resid:.3g} exceeds {RESIDUAL_TOL:g} "
            f"(||w||_1 = {np.abs(w_allowed).sum():.3g}); the system is too ill-conditioned"
        )
    return w, full, rhs


def _finish(wv: WeightVector, warn: bool) -> WeightVector:
    if warn and wv.l1_norm > 1.0 / wv.c + 1e-12:
        warnings.warn(
            f"{wv.describe()}: ||w||_1 = {wv.l1_norm:.4g} exceeds 1/c = {1 / wv.c:.4g}",
            WeightNormWarning,
            stacklevel=3,
        )
    for arr in (wv.w, wv.constraints, wv.rhs):
        arr.setflags(write=False)
    return wv


def _n_moments(d: int) -> int:
    return math.ceil(d / 2) - 1


@lru_cache(maxsize=512)
def _general(k: int, d: int, order: int, c: float):
    j = allowed_indices(k, c).astype(float)
    rows = [np.ones_like(j)]
    for l in range(_n_moments(d) + 1):
        for i in range(order + 1):
            if (l, i) == (0, 0):
                continue
            rows.append(j ** (2.0 * l / d - i))
    rhs = np.zeros(len(rows))
    rhs[0] = 1.0
    return _min_norm(np.array(rows), rhs, k, j.astype(int), f"general weights k={k} d={d} I={order}")


def solve_general_weights(k: int, d: int, order: int, c: float = 0.25, warn: bool = True) -> WeightVector:
    """Minimum-norm member of the general class with moment order ``order`` (I).

    Constraints: sum w_j = 1, w_j = 0 for j < c k, and
    sum_j j^(2l/d - i) w_j = 0 for 0 <= l <= ceil(d/2) - 1, 0 <= i <= I, (l, i) != (0, 0).
    """
    if d < 1 or order < 0:
        raise ValueError("need d >= 1 and I >= 0")
    w, A, rhs = _general(int(k), int(d), int(order), float(c))
    return _finish(WeightVector(w.copy(), k, "general", d, c, order=order, constraints=A.copy(), rhs=rhs.copy()), warn)


@lru_cache(maxsize=512)
def _gamma_class(k: int, d: int, b: float, c: float, label: str):
    jint = allowed_indices(k, c)
    j = jint.astype(float) - b
    if np.any(j <= 0):
        bad = int(jint[np.argmax(j <= 0)])
        raise DomainError(
            f"{label}: index j={bad} has j - b = {bad - b:g} <= 0, crossing a Gamma pole; "
            "increase k or c"
        )
    rows = [np.ones_like(j)]
    for l in range(1, _n_moments(d) + 1):
        rows.append(np.exp(gammaln(j + 2.0 * l / d) - gammaln(j)))
    rhs = np.zeros(len(rows))
    rhs[0] = 1.0
    return _min_norm(np.array(rows), rhs, k, jint, f"{label} k={k} d={d}")


def solve_kl_weights(k: int, d: int, c: float = 0.25, warn: bool = True) -> WeightVector:
    """Minimum-norm member of the KL class: sum_j Gamma(j + 2l/d)/Gamma(j) w_j = 0, l >= 1."""
    w, A, rhs = _gamma_class(int(k), int(d), 0.0, float(c), "KL weights")
    return _finish(WeightVector(w.copy(), k, "kl", d, c, constraints=A.copy(), rhs=rhs.copy()), warn)


def solve_renyi_weights(k: int, d: int, b: float, c: float = 0.25, warn: bool = True) -> WeightVector:
    """Minimum-norm member of the Renyi class with shift b.

    Constraints use Gamma(j - b + 2l/d)/Gamma(j - b); use b = kappa - 1 on the
    first-sample side and b = 1 - kappa on the second-sample side.
    """
    w, A, rhs = _gamma_class(int(k), int(d), float(b), float(c), "Renyi weights")
    return _finish(WeightVector(w.copy(), k, "renyi", d, c, b=float(b), constraints=A.copy(), rhs=rhs.copy()), warn)
