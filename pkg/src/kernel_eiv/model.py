"""Problem data: observed samples, noise model and solver state."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .kernel import Hyperparameters
from .linops import SelectionOperator, scatter

SIGMA_FLOOR = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float).ravel()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Available input/output samples over a horizon of ``N`` instants.

    Missing samples are simply absent from the selection operators.
    """

    N: int
    input_sel: SelectionOperator
    u_obs: np.ndarray
    output_sel: SelectionOperator
    y_obs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u_obs", _frozen(self.u_obs))
        object.__setattr__(self, "y_obs", _frozen(self.y_obs))
        for name, sel, vals in (("input", self.input_sel, self.u_obs),
                                ("output", self.output_sel, self.y_obs)):
            if sel.ambient_dim != self.N:
                raise ValueError(
                    f"{name} selection spans {sel.ambient_dim} samples, "
                    f"dataset horizon is {self.N}")
            if vals.size != sel.size:
                raise ValueError(
                    f"{name} has {vals.size} values for {sel.size} times")

    @classmethod
    def from_arrays(cls, u, y, u_mask=None, y_mask=None) -> "Dataset":
        """Build from full-length arrays; masks flag the observed entries."""
        u = np.asarray(u, dtype=float)
        y = np.asarray(y, dtype=float)
        if u.shape != y.shape or u.ndim != 1:
            raise ValueError("u and y must be 1-D arrays of equal length")
        u_mask = np.ones(u.size, bool) if u_mask is None else np.asarray(u_mask, bool)
        y_mask = np.ones(y.size, bool) if y_mask is None else np.asarray(y_mask, bool)
        return cls(u.size,
                   SelectionOperator.from_mask(u_mask), u[u_mask],
                   SelectionOperator.from_mask(y_mask), y[y_mask])

    @property
    def N_u(self) -> int:
        return self.input_sel.size

    @property
    def N_y(self) -> int:
        return self.output_sel.size

    def u_scattered(self) -> np.ndarray:
        return scatter(self.input_sel, self.u_obs)

    def y_scattered(self) -> np.ndarray:
        return scatter(self.output_sel, self.y_obs)

    def with_masks(self, keep_u, keep_y) -> "Dataset":
        """Restrict to a subset of the already observed samples (0-based masks)."""
        keep_u = np.asarray(keep_u, bool)
        keep_y = np.asarray(keep_y, bool)
        u_full = np.zeros(self.N)
        y_full = np.zeros(self.N)
        u_full[self.input_sel.index] = self.u_obs
        y_full[self.output_sel.index] = self.y_obs
        mu = np.zeros(self.N, bool)
        my = np.zeros(self.N, bool)
        mu[self.input_sel.index] = True
        my[self.output_sel.index] = True
        return Dataset.from_arrays(u_full, y_full, mu & keep_u, my & keep_y)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.N == other.N
                and self.input_sel == other.input_sel
                and self.output_sel == other.output_sel
                and np.array_equal(self.u_obs, other.u_obs)
                and np.array_equal(self.y_obs, other.y_obs))


Record = tuple[int, Optional[float], Optional[float]]


def dataset_from_records(records: Iterable[Record], N: int) -> Dataset:
    """Build a dataset from ``(t, u, y)`` rows; ``None`` marks a missing value."""
    seen = set()
    us, ys = [], []
    for t, u, y in records:
        t = int(t)
        if t in seen:
            raise ValueError(f"duplicate time index {t}")
        if not 1 <= t <= N:
            raise ValueError(f"time index {t} outside [1, {N}]")
        seen.add(t)
        if u is not None:
            us.append((t, float(u)))
        if y is not None:
            ys.append((t, float(y)))
    us.sort()
    ys.sort()
    return Dataset(
        N,
        SelectionOperator(N, tuple(t for t, _ in us)), [v for _, v in us],
        SelectionOperator(N, tuple(t for t, _ in ys)), [v for _, v in ys],
    )


def dataset_to_records(dataset: Dataset) -> list[Record]:
    """One row per instant ``1..N``, missing values as ``None``."""
    u = dict(zip(dataset.input_sel.times, dataset.u_obs.tolist()))
    y = dict(zip(dataset.output_sel.times, dataset.y_obs.tolist()))
    return [(t, u.get(t), y.get(t)) for t in range(1, dataset.N + 1)]


@dataclass(frozen=True)
class NoiseModel:
    """Measurement noise variances tied by the known ratio ``gamma``."""

    gamma: float
    sigma_y2: float
    sigma_u2: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.sigma_y2 > 0 and self.sigma_u2 > 0):
            raise ValueError("noise variances and gamma must be positive")
        if abs(self.sigma_u2 * self.gamma - self.sigma_y2) > 1e-12 * max(1.0, self.sigma_y2):
            raise ValueError("sigma_u2 * gamma must equal sigma_y2")

    @classmethod
    def from_output_variance(cls, gamma: float, sigma_y2: float) -> "NoiseModel":
        # floor keeps both variances >= SIGMA_FLOOR without breaking the ratio
        sigma_y2 = max(float(sigma_y2), SIGMA_FLOOR * max(1.0, gamma))
        return cls(float(gamma), sigma_y2, sigma_y2 / gamma)


@dataclass
class EMState:
    """Mutable iterate owned by a single solver run."""

    w: np.ndarray
    hyper: Hyperparameters
    noise: NoiseModel
    iteration: int = 0
    loglik_history: list[float] = field(default_factory=list)


@dataclass
class SolveResult:
    g_hat: np.ndarray
    w_hat: np.ndarray
    v_hat: np.ndarray
    posterior_cov: np.ndarray
    final_state: EMState
    converged: bool
    iterations: int

    @property
    def hyper(self) -> Hyperparameters:
        return self.final_state.hyper

    @property
    def noise(self) -> NoiseModel:
        return self.final_state.noise


def validate(dataset: Dataset, n: int) -> list[str]:
    """Human-readable warnings about a dataset before identification."""
    from .identifiability import check_structural

    warnings = []
    if dataset.N_y == 0:
        warnings.append("no output samples: the posterior equals the prior")
    if dataset.N_u == 0:
        warnings.append("no input samples")
    if n > dataset.N:
        warnings.append(f"n={n} taps exceeds the horizon N={dataset.N}")
    report = check_structural(dataset, n)
    if not report.structural_ok:
        times = ", ".join(map(str, report.offending_times))
        warnings.append(
            f"identifiability: missing input samples at t={times} "
            f"cannot be recovered from the available outputs")
    return warnings
