"""First-order stable-spline kernel ``K[i, j] = beta ** max(i, j)``."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import NumericalFailure

BETA_MIN = 1e-3
BETA_MAX = 1.0 - 1e-3


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel scale ``lam`` and decay ``beta``."""

    lam: float
    beta: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"kernel scale must be positive, got {self.lam}")
        _check_beta(self.beta)


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")


@lru_cache(maxsize=16)
def _exponents(n: int) -> np.ndarray:
    i = np.arange(1, n + 1, dtype=float)
    e = np.maximum.outer(i, i)
    e.setflags(write=False)
    return e


def kernel_matrix(beta: float, n: int) -> np.ndarray:
    _check_beta(beta)
    if n < 1:
        raise ValueError("kernel size must be positive")
    return np.power(float(beta), _exponents(n))


@dataclass(frozen=True)
class KernelFactor:
    """Cholesky factorization of ``K_beta``, reused for solves and log-dets."""

    beta: float
    n: int
    chol: np.ndarray  # lower triangular

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def solve(self, B) -> np.ndarray:
        return scipy.linalg.cho_solve((self.chol, True), B, check_finite=False)

    def trace_solve(self, C) -> float:
        """``trace(K^{-1} C)`` for symmetric ``C``."""
        return float(np.trace(self.solve(C)))

    def trace_solve_factor(self, F) -> float:
        """``trace(K^{-1} F F^T)`` as the squared norm of ``L^{-1} F``."""
        X = scipy.linalg.solve_triangular(self.chol, F, lower=True, check_finite=False)
        return float(np.sum(X * X))


@lru_cache(maxsize=512)
def factorize(beta: float, n: int) -> KernelFactor:
    K = kernel_matrix(beta, n)
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(
            f"stable-spline kernel is not numerically positive definite "
            f"for beta={beta!r}, n={n}", beta=beta) from exc
    if not np.all(np.isfinite(L)) or np.any(np.diag(L) <= 0):
        raise NumericalFailure(
            f"degenerate Cholesky pivots for beta={beta!r}, n={n}", beta=beta)
    L.setflags(write=False)
    return KernelFactor(float(beta), int(n), L)


def kernel_logdet(beta: float, n: int) -> float:
    _check_beta(beta)
    return factorize(float(beta), int(n)).logdet


def kernel_solve(beta: float, B) -> np.ndarray:
    """Return ``X`` with ``K_beta X = B``."""
    _check_beta(beta)
    B = np.asarray(B, dtype=float)
    return factorize(float(beta), B.shape[0]).solve(B)
