"""Posterior of the impulse response and the marginal likelihood of the data.

Both are computed in the coordinates whitened by the kernel's Cholesky
factor ``K = L L^T``.  With ``B = P_y W L`` and
``Phi = B^T B / sigma_y2 + I / lam`` the posterior is

    P = L Phi^{-1} L^T,    m = L Phi^{-1} B^T y_obs / sigma_y2,

which equals the information form ``(W^T P_y^T P_y W / sigma_y2 + (lam K)^{-1})^{-1}``
without ever inverting ``K``.  Only ``n x n`` systems are factorized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalFailure
from .kernel import Hyperparameters, factorize
from .linops import toeplitz
from .model import Dataset, EMState

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PosteriorMoments:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def second_moment(self) -> np.ndarray:
        return self.cov + np.outer(self.mean, self.mean)


@dataclass(frozen=True)
class _Whitened:
    L: np.ndarray       # kernel Cholesky factor
    R: np.ndarray       # Cholesky factor of Phi
    c: np.ndarray       # R^{-1} B^T y_obs / sigma_y2
    lam: float
    sigma_y2: float


def regressor(w, dataset: Dataset, n: int) -> np.ndarray:
    """Rows of ``toeplitz(w, N, n)`` at the observed output times."""
    W = toeplitz(w, dataset.N, n)
    return W[dataset.output_sel.index]


def _whiten(w, hyper: Hyperparameters, sigma_y2: float, dataset: Dataset,
            n: int) -> _Whitened:
    if n < 1:
        raise ValueError("number of taps must be positive")
    if not sigma_y2 > 0:
        raise ValueError("sigma_y2 must be positive")
    L = factorize(float(hyper.beta), int(n)).chol
    B = regressor(w, dataset, n) @ L
    Phi = B.T @ B / sigma_y2
    Phi[np.diag_indices(n)] += 1.0 / hyper.lam
    try:
        R = np.linalg.cholesky(Phi)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(
            "posterior information matrix is not positive definite",
            condition=float(np.linalg.cond(Phi))) from exc
    d = np.diag(R)
    if not np.all(np.isfinite(R)) or d.min() <= 0:
        raise NumericalFailure("posterior information matrix is singular",
                               condition=float("inf"))
    c = scipy.linalg.solve_triangular(R, B.T @ dataset.y_obs, lower=True) / sigma_y2
    return _Whitened(L, R, c, float(hyper.lam), float(sigma_y2))


def posterior_moments(w, hyper: Hyperparameters, sigma_y2: float,
                      dataset: Dataset, n: int) -> PosteriorMoments:
    """Gaussian posterior ``g | y_obs ~ N(m, P)`` for a given noiseless input."""
    wh = _whiten(w, hyper, sigma_y2, dataset, n)
    # X = R^{-1} L^T so that P = X^T X and m = X^T c
    X = scipy.linalg.solve_triangular(wh.R, wh.L.T, lower=True)
    P = X.T @ X
    P = 0.5 * (P + P.T)
    return PosteriorMoments(X.T @ wh.c, P)


def output_loglik(w, hyper: Hyperparameters, sigma_y2: float,
                  dataset: Dataset, n: int) -> float:
    """``log N(y_obs; 0, lam P_y W K W^T P_y^T + sigma_y2 I)``."""
    Ny = dataset.N_y
    if Ny == 0:
        return 0.0
    wh = _whiten(w, hyper, sigma_y2, dataset, n)
    y = dataset.y_obs
    logdet = Ny * np.log(sigma_y2) + n * np.log(wh.lam) + 2.0 * np.sum(np.log(np.diag(wh.R)))
    quad = float(y @ y) / sigma_y2 - float(wh.c @ wh.c)
    return -0.5 * (Ny * LOG_2PI + logdet + quad)


def input_loglik(w, sigma_u2: float, dataset: Dataset) -> float:
    """``log N(u_obs; P_u w, sigma_u2 I)``."""
    Nu = dataset.N_u
    if Nu == 0:
        return 0.0
    r = dataset.u_obs - np.asarray(w, dtype=float)[dataset.input_sel.index]
    return -0.5 * (Nu * (LOG_2PI + np.log(sigma_u2)) + float(r @ r) / sigma_u2)


def marginal_loglik(state: EMState, dataset: Dataset, n: int,
                    include_input: bool = True) -> float:
    """Log-likelihood of the available samples with the taps integrated out.

    The input and output terms are independent, so they simply add.  Pass
    ``include_input=False`` for the fixed-input baseline, where the input
    samples are treated as exact regressors.
    """
    value = output_loglik(state.w, state.hyper, state.noise.sigma_y2, dataset, n)
    if include_input:
        value += input_loglik(state.w, state.noise.sigma_u2, dataset)
    if not np.isfinite(value):
        raise NumericalFailure("marginal likelihood is not finite",
                               iteration=state.iteration)
    return float(value)
