"""Identifiability of the missing input samples.

A missing input at time ``tau`` is seen by the output at ``tau + k`` for
every lag ``k`` with a nonzero tap.  Visibility of each missing sample on
its own is necessary but not sufficient: several missing inputs may share
the same few outputs.  The structural test therefore also requires a
matching that assigns every missing input its own observed output, which is
exactly the generic rank condition of ``G^T P_y^T P_y G / s_y + P_u^T P_u / s_u``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Union

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import maximum_bipartite_matching

from .linops import mask_gram, toeplitz
from .model import Dataset, NoiseModel

COND_LIMIT = 1e12


@dataclass
class IdentifiabilityReport:
    structural_ok: Optional[bool] = None
    rank_ok: Optional[bool] = None
    offending_times: list[int] = field(default_factory=list)
    condition_estimate: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.structural_ok is not False and self.rank_ok is not False

    def merge(self, other: "IdentifiabilityReport") -> "IdentifiabilityReport":
        pick = lambda a, b: b if a is None else a
        return IdentifiabilityReport(
            pick(self.structural_ok, other.structural_ok),
            pick(self.rank_ok, other.rank_ok),
            sorted(set(self.offending_times) | set(other.offending_times)),
            pick(self.condition_estimate, other.condition_estimate),
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _lags(support: Union[int, Iterable[int]]) -> np.ndarray:
    if isinstance(support, (int, np.integer)):
        if support < 1:
            raise ValueError("tap count must be positive")
        return np.arange(int(support))
    return np.array(sorted({int(k) for k in support}), dtype=int)


def check_structural(dataset: Dataset,
                     support: Union[int, Iterable[int]]) -> IdentifiabilityReport:
    """Structural test for a tap count ``n`` (lags ``0..n-1``) or a set of lags."""
    lags = _lags(support)
    missing = np.array(dataset.input_sel.missing, dtype=int)
    observed = np.zeros(dataset.N + 1, dtype=bool)
    observed[list(dataset.output_sel.times)] = True
    if missing.size == 0:
        return IdentifiabilityReport(structural_ok=True)

    rows, cols = [], []
    invisible = []
    for i, tau in enumerate(missing):
        hits = [t for t in tau + lags if 1 <= t <= dataset.N and observed[t]]
        if not hits:
            invisible.append(int(tau))
        rows.extend([i] * len(hits))
        cols.extend(t - 1 for t in hits)
    if invisible:
        return IdentifiabilityReport(structural_ok=False, offending_times=invisible)

    graph = scipy.sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(missing.size, dataset.N))
    match = maximum_bipartite_matching(graph, perm_type="column")
    unmatched = [int(t) for t, j in zip(missing, match) if j < 0]
    return IdentifiabilityReport(structural_ok=not unmatched, offending_times=unmatched)


def information_matrix(g, dataset: Dataset, noise: NoiseModel) -> np.ndarray:
    """``G^T P_y^T P_y G / sigma_y2 + P_u^T P_u / sigma_u2``."""
    N = dataset.N
    G = toeplitz(np.asarray(g, dtype=float), N, N)
    Gy = G[dataset.output_sel.index]
    H = Gy.T @ Gy / noise.sigma_y2
    H[np.diag_indices(N)] += mask_gram(dataset.input_sel) / noise.sigma_u2
    return H


def check_rank(g, dataset: Dataset, noise: NoiseModel) -> IdentifiabilityReport:
    """Numerical test: condition number of the information matrix below ``1e12``."""
    H = information_matrix(g, dataset, noise)
    s = np.linalg.svd(H, compute_uv=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    ok = cond < COND_LIMIT
    offending = []
    if not ok:
        # missing samples with a vanishing row are the obvious culprits
        d = np.diag(H)
        offending = [t for t in dataset.input_sel.missing
                     if d[t - 1] <= 1e-14 * max(d.max(), 1e-300)]
    return IdentifiabilityReport(rank_ok=ok, offending_times=offending,
                                 condition_estimate=cond)
