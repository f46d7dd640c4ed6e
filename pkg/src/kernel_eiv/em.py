"""EM maximization of the marginal likelihood over the noiseless input,
the kernel hyperparameters and (optionally) the noise variances.

Each iteration computes the Gaussian posterior of the taps at the current
parameters (E-step) and then maximizes the expected complete-data
log-likelihood in closed form for ``w``, ``lam`` and the noise level, and by
a one-dimensional search for ``beta`` (M-step).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import IdentifiabilityError, NumericalFailure
from .kernel import BETA_MAX, BETA_MIN, Hyperparameters, factorize
from .linops import mask_gram, scatter, toeplitz
from .model import Dataset, EMState, NoiseModel, SolveResult
from .posterior import PosteriorMoments, marginal_loglik, posterior_moments

log = logging.getLogger(__name__)

GAMMA_MAX = 1e9
MONOTONE_TOL = 1e-8

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SolverConfig:
    n: int
    tol_rel: float = 0.01
    max_iter: int = 200
    beta_grid: int = 100
    beta_refine: int = 30
    estimate_noise: bool = True
    fixed_input_mode: bool = False
    lam0: float = 10.0
    beta0: float = 0.6
    sigma_y2: Optional[float] = None  # initial (or fixed) output noise variance

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not self.tol_rel > 0:
            raise ValueError("tol_rel must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.beta_grid < 2 or self.beta_refine < 0:
            raise ValueError("beta_grid must be >= 2 and beta_refine >= 0")
        if not BETA_MIN <= self.beta0 <= BETA_MAX:
            raise ValueError(f"beta0 must lie in [{BETA_MIN}, {BETA_MAX}]")
        Hyperparameters(self.lam0, self.beta0)
        if self.sigma_y2 is not None and not self.sigma_y2 > 0:
            raise ValueError("sigma_y2 must be positive")


@dataclass(frozen=True)
class EStepQuantities:
    moments: PosteriorMoments
    M: np.ndarray  # toeplitz of the zero-padded posterior mean, N x N
    A: np.ndarray  # E[G^T P_y^T P_y G], N x N


def second_moment_matrix(C: np.ndarray, output_times, N: int) -> np.ndarray:
    """``sum_{k,l} C[k,l] S^{k-1} P_y^T P_y (S^T)^{l-1}`` without forming shifts.

    Row ``t`` of ``G`` carries ``g[k]`` in column ``t - k``, so each observed
    output adds the block ``C`` (index-reversed) on the window ending at ``t``.
    """
    n = C.shape[0]
    pad = np.zeros((N + n - 1, N + n - 1))
    Crev = C[::-1, ::-1]
    for t in np.asarray(output_times, dtype=int) - 1:
        pad[t:t + n, t:t + n] += Crev
    A = pad[n - 1:, n - 1:].copy()
    return 0.5 * (A + A.T)


def estep(state: EMState, dataset: Dataset, cfg: SolverConfig) -> EStepQuantities:
    n = cfg.n
    moments = posterior_moments(state.w, state.hyper, state.noise.sigma_y2, dataset, n)
    N = dataset.N
    M = toeplitz(moments.mean, N, N)
    A = second_moment_matrix(moments.second_moment, dataset.output_sel.times, N)
    return EStepQuantities(moments, M, A)


def _rcond(chol: np.ndarray, H: np.ndarray) -> float:
    anorm = float(np.abs(H).sum(axis=0).max())
    rcond, info = lapack.dpocon(chol, anorm, uplo="L")
    return float(rcond) if info == 0 else 0.0


def update_w(eq: EStepQuantities, dataset: Dataset, noise: NoiseModel) -> np.ndarray:
    """Closed-form maximizer of the expected input/output log-likelihood in ``w``."""
    gamma = min(noise.gamma, GAMMA_MAX)
    H = eq.A + np.diag(gamma * mask_gram(dataset.input_sel))
    rhs = eq.M.T @ dataset.y_scattered() + gamma * dataset.u_scattered()
    diag = np.diag(H)
    scale = max(float(diag.max(initial=0.0)), 1e-300)
    dead = int(np.count_nonzero(diag <= 1e-14 * scale))
    if dead == 0:
        try:
            c = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            c = None
        if c is not None and _rcond(c, H) > 1e-14:
            return scipy.linalg.cho_solve((c, True), rhs, check_finite=False)
    ev = np.linalg.eigvalsh(H)
    null_dim = max(dead, int(np.count_nonzero(ev <= 1e-14 * max(ev[-1], 1e-300))))
    raise IdentifiabilityError(
        f"input update is singular (null-space dimension {max(null_dim, 1)})",
        null_dim=max(null_dim, 1))


def lambda_star(beta: float, moments: PosteriorMoments) -> float:
    """Maximizer over ``lam`` of ``E log p(g; lam, beta)``: ``trace(K^{-1} C) / n``."""
    C = moments.second_moment
    n = C.shape[0]
    value = factorize(float(beta), n).trace_solve(C) / n
    if not value > 0:
        raise NumericalFailure("degenerate posterior moments: zero second moment",
                               beta=beta)
    return value


def _psd_factor(C: np.ndarray) -> np.ndarray:
    """``F`` with ``F F^T = C`` for a symmetric PSD ``C``."""
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(C)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def beta_objective(beta: float, C: np.ndarray, F: Optional[np.ndarray] = None) -> float:
    """``n log lam*(beta) + log det K_beta``; minimizing it maximizes the prior term.

    ``F`` is an optional precomputed factor of ``C``.
    """
    n = C.shape[0]
    try:
        fac = factorize(float(beta), n)
    except NumericalFailure:
        return math.inf
    tr = fac.trace_solve(C) if F is None else fac.trace_solve_factor(F)
    if not tr > 0:
        return math.inf
    return n * math.log(tr / n) + fac.logdet


def golden_section(f: Callable[[float], float], a: float, b: float,
                   iters: int) -> tuple[float, float]:
    """Golden-section minimization on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def beta_grid(size: int) -> np.ndarray:
    return np.geomspace(BETA_MIN, BETA_MAX, size)


def update_beta(moments: PosteriorMoments, cfg: SolverConfig,
                current: Optional[float] = None) -> tuple[float, float]:
    """Coarse log-spaced grid plus golden-section refinement of ``beta``.

    ``current`` is kept when no candidate improves on it, so the M-step never
    decreases the expected log-prior.
    """
    C = moments.second_moment
    F = _psd_factor(C)
    objective = lambda b: beta_objective(b, C, F)
    grid = beta_grid(cfg.beta_grid)
    values = np.array([objective(b) for b in grid])
    i = int(np.argmin(values))
    best_b, best_f = float(grid[i]), float(values[i])
    if cfg.beta_refine > 0:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid.size - 1)]
        b, fb = golden_section(objective, lo, hi, cfg.beta_refine)
        if fb < best_f:
            best_b, best_f = b, fb
    if current is not None and objective(current) <= best_f:
        best_b = float(current)
    if not math.isfinite(best_f) and current is None:
        raise NumericalFailure("beta objective is not finite on the search grid")
    return float(best_b), lambda_star(best_b, moments)


def _output_residual(w, eq: EStepQuantities, dataset: Dataset) -> float:
    """``E ||y_obs - P_y G w||^2`` under the current posterior."""
    y = dataset.y_obs
    Mw = (eq.M @ w)[dataset.output_sel.index]
    return float(y @ y - 2.0 * y @ Mw + w @ eq.A @ w)


def _input_residual(w, dataset: Dataset) -> float:
    r = dataset.u_obs - w[dataset.input_sel.index]
    return float(r @ r)


def update_noise(w_next, eq: EStepQuantities, dataset: Dataset, gamma: float,
                 include_input: bool = True) -> NoiseModel:
    """Closed-form noise update with ``sigma_u2 = sigma_y2 / gamma`` held fixed.

    ``include_input=False`` drops the input term (fixed-input baseline).
    """
    gamma = min(float(gamma), GAMMA_MAX)
    w_next = np.asarray(w_next, dtype=float)
    if include_input:
        count = dataset.N_u + dataset.N_y
        total = _output_residual(w_next, eq, dataset) + gamma * _input_residual(w_next, dataset)
    else:
        count = dataset.N_y
        total = _output_residual(w_next, eq, dataset)
    if count == 0:
        raise ValueError("noise update needs at least one observed sample")
    return NoiseModel.from_output_variance(gamma, total / count)


def smooth_output(w, g) -> np.ndarray:
    """Noiseless output ``toeplitz(w, N, n) @ g``."""
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    return toeplitz(w, w.size, g.size) @ g


def interpolate_input(dataset: Dataset) -> np.ndarray:
    """Observed inputs with gaps filled linearly, ends held constant."""
    if dataset.N_u == 0:
        return np.zeros(dataset.N)
    t = np.arange(1, dataset.N + 1, dtype=float)
    return np.interp(t, np.asarray(dataset.input_sel.times, float), dataset.u_obs)


def initial_state(dataset: Dataset, gamma: float, cfg: SolverConfig) -> EMState:
    gamma = min(float(gamma), GAMMA_MAX)
    w0 = interpolate_input(dataset)
    hyper = Hyperparameters(cfg.lam0, cfg.beta0)
    if cfg.sigma_y2 is not None:
        s2 = cfg.sigma_y2
    elif dataset.N_y > 1:
        # ridge residuals of the output on the interpolated input
        m = posterior_moments(w0, hyper, 1.0, dataset, cfg.n).mean
        r = dataset.y_obs - (toeplitz(w0, dataset.N, cfg.n) @ m)[dataset.output_sel.index]
        s2 = float(np.var(r, ddof=1))
    else:
        s2 = 1.0
    return EMState(w0, hyper, NoiseModel.from_output_variance(gamma, s2))


def _relative_change(old: EMState, new: EMState) -> float:
    return max(
        float(np.linalg.norm(new.w - old.w)) / (1.0 + float(np.linalg.norm(old.w))),
        abs(new.hyper.lam - old.hyper.lam) / (1.0 + old.hyper.lam),
        abs(new.hyper.beta - old.hyper.beta) / (1.0 + old.hyper.beta),
        abs(new.noise.sigma_y2 - old.noise.sigma_y2) / (1.0 + old.noise.sigma_y2),
    )


def run_em(dataset: Dataset, gamma: float, cfg: SolverConfig,
           init: Optional[EMState] = None) -> SolveResult:
    """Iterate E- and M-steps until the relative parameter change drops below
    ``cfg.tol_rel`` or ``cfg.max_iter`` iterations have run."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if cfg.fixed_input_mode and not dataset.input_sel.is_full():
        raise ValueError("fixed-input mode needs a fully observed input")
    n = cfg.n
    with_input = not cfg.fixed_input_mode
    state = init if init is not None else initial_state(dataset, gamma, cfg)
    if cfg.fixed_input_mode:
        state = replace(state, w=dataset.u_scattered())
    state = replace(state, loglik_history=list(state.loglik_history))
    if not state.loglik_history:
        state.loglik_history.append(marginal_loglik(state, dataset, n, with_input))

    converged = False
    for _ in range(cfg.max_iter):
        eq = estep(state, dataset, cfg)
        if cfg.fixed_input_mode:
            w_next = state.w
        else:
            try:
                w_next = update_w(eq, dataset, state.noise)
            except IdentifiabilityError as exc:
                from .identifiability import check_structural
                exc.report = check_structural(dataset, n)
                raise
        beta, lam = update_beta(eq.moments, cfg, state.hyper.beta)
        noise = state.noise
        if cfg.estimate_noise:
            noise = update_noise(w_next, eq, dataset, state.noise.gamma, with_input)
        new = EMState(w_next, Hyperparameters(lam, beta), noise,
                      state.iteration + 1, state.loglik_history)
        L = marginal_loglik(new, dataset, n, with_input)
        if L < state.loglik_history[-1] - MONOTONE_TOL:
            log.warning("marginal likelihood decreased by %.3g at iteration %d",
                        state.loglik_history[-1] - L, new.iteration)
        new.loglik_history.append(L)
        change = _relative_change(state, new)
        state = new
        if change < cfg.tol_rel:
            converged = True
            break

    final = posterior_moments(state.w, state.hyper, state.noise.sigma_y2, dataset, n)
    w_hat = np.array(state.w, dtype=float)
    return SolveResult(
        g_hat=final.mean,
        w_hat=w_hat,
        v_hat=smooth_output(w_hat, final.mean),
        posterior_cov=final.cov,
        final_state=state,
        converged=converged,
        iterations=state.iteration,
    )


def naive_identify(dataset: Dataset, cfg: SolverConfig) -> SolveResult:
    """Empirical-Bayes baseline that treats the measured input as noiseless."""
    if not dataset.input_sel.is_full():
        raise ValueError("the fixed-input baseline needs every input sample")
    return run_em(dataset, 1.0, replace(cfg, fixed_input_mode=True))
