"""Structured linear operators: Toeplitz matrices, shifts and sample selection.

Time indices at the interface are 1-based; arrays are stored 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def toeplitz(a, m: int, n: int) -> np.ndarray:
    """Lower-triangular banded Toeplitz matrix built from ``a``.

    Entry ``(i, j)`` (1-based) is ``a[i - j + 1]`` when ``i >= j`` and
    ``i - j + 1 <= len(a)``, zero otherwise.  ``toeplitz(w, N, n) @ g`` is the
    convolution of ``w`` with the taps ``g`` where ``g[0]`` acts on lag 0.
    """
    if m < 1 or n < 1:
        raise ValueError(f"toeplitz dimensions must be positive, got {m}x{n}")
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0:
        raise ValueError("toeplitz source vector is empty")
    out = np.zeros((m, n))
    L = min(a.size, m)
    for k in range(L):
        cols = min(n, m - k)
        if cols <= 0:
            break
        idx = np.arange(cols)
        out[idx + k, idx] = a[k]
    return out


def shift_apply(x, k: int) -> np.ndarray:
    """Apply the upward shift ``k`` times: ``out[i] = x[i + k]``, zero-filled."""
    if k < 0:
        raise ValueError("shift order must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if k < x.size:
        out[: x.size - k] = x[k:]
    return out


def shift_matrix(N: int) -> np.ndarray:
    """Dense ``N x N`` upward shift, ``[S]_{i,j} = delta_{i, j-1}``."""
    return np.eye(N, k=1)


@dataclass(frozen=True)
class SelectionOperator:
    """Row-selection operator over a horizon of ``ambient_dim`` samples.

    ``times`` holds the 1-based instants that are kept.  The operator is
    never materialized; products are gathers and scatters.
    """

    ambient_dim: int
    times: tuple[int, ...] = field(default=())

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if self.ambient_dim < 0:
            raise ValueError("ambient_dim must be non-negative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("selection times must be strictly increasing")
        if times and (times[0] < 1 or times[-1] > self.ambient_dim):
            raise ValueError(
                f"selection times must lie in [1, {self.ambient_dim}]")

    @classmethod
    def full(cls, N: int) -> "SelectionOperator":
        return cls(N, tuple(range(1, N + 1)))

    @classmethod
    def from_mask(cls, mask) -> "SelectionOperator":
        mask = np.asarray(mask, dtype=bool)
        return cls(mask.size, tuple(int(i) + 1 for i in np.flatnonzero(mask)))

    @property
    def size(self) -> int:
        return len(self.times)

    @property
    def index(self) -> np.ndarray:
        """0-based positions of the selected samples."""
        return np.asarray(self.times, dtype=int) - 1

    @property
    def missing(self) -> tuple[int, ...]:
        kept = set(self.times)
        return tuple(t for t in range(1, self.ambient_dim + 1) if t not in kept)

    def is_full(self) -> bool:
        return self.size == self.ambient_dim

    def dense(self) -> np.ndarray:
        """Explicit ``|times| x N`` matrix; for tests and oracles only."""
        P = np.zeros((self.size, self.ambient_dim))
        P[np.arange(self.size), self.index] = 1.0
        return P


def select(op: SelectionOperator, x) -> np.ndarray:
    """Gather ``x`` at the selected times (``P x``)."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != op.ambient_dim:
        raise ValueError(
            f"select expects length {op.ambient_dim}, got {x.shape[0]}")
    return x[op.index]


def scatter(op: SelectionOperator, z) -> np.ndarray:
    """Place ``z`` at the selected times, zero elsewhere (``P^T z``)."""
    z = np.asarray(z, dtype=float)
    if z.shape[0] != op.size:
        raise ValueError(f"scatter expects length {op.size}, got {z.shape[0]}")
    out = np.zeros((op.ambient_dim,) + z.shape[1:])
    out[op.index] = z
    return out


def mask_gram(op: SelectionOperator) -> np.ndarray:
    """Diagonal of ``P^T P`` as a 0/1 vector."""
    d = np.zeros(op.ambient_dim)
    d[op.index] = 1.0
    return d
