"""Surrogate benchmark: random stable systems, noisy data and missing samples.

Systems are random state-space models whose impulse responses are normalized
to unit energy, so a unit-variance white input yields a unit-variance
noiseless output.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .em import GAMMA_MAX, SolverConfig, naive_identify, run_em
from .errors import IdentifiabilityError, NumericalFailure
from .identifiability import check_structural
from .linops import toeplitz
from .metrics import fit, median
from .model import Dataset

log = logging.getLogger(__name__)

SCENARIOS = ("A1", "A2", "A3", "B")

# missing-data conditions per scenario and the default level grids
DEFAULT_LEVELS = {
    "A1": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
    "A2": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
    "A3": [0.0, 0.05, 0.1, 0.15, 0.2, 0.25],
    "B": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
}
LEVEL_RANGE = {"A1": (0.0, 0.5), "A2": (0.0, 0.5), "A3": (0.0, 0.25), "B": (0.0, 1.0)}


@dataclass(frozen=True)
class SystemConfig:
    min_order: int = 5
    max_order: int = 30
    max_radius: float = 0.95
    tail_tol: float = 1e-6
    horizon: int = 5000


@dataclass(frozen=True)
class SyntheticSystem:
    g_true: np.ndarray
    order: int
    seed: object  # int or SeedSequence
    spectral_radius: float


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_system(seed, config: SystemConfig = SystemConfig()) -> SyntheticSystem:
    """Random stable SISO system with unit-energy impulse response."""
    rng = _rng(seed)
    while True:
        order = int(rng.integers(config.min_order, config.max_order + 1))
        n_pairs = int(rng.integers(0, order // 2 + 1))
        n_real = order - 2 * n_pairs
        A = np.zeros((order, order))
        poles = []
        for i in range(n_pairs):
            r = config.max_radius * math.sqrt(rng.uniform())
            th = rng.uniform(0.0, math.pi)
            a, b = r * math.cos(th), r * math.sin(th)
            A[2 * i:2 * i + 2, 2 * i:2 * i + 2] = [[a, -b], [b, a]]
            poles.append(r)
        for j in range(2 * n_pairs, order):
            p = rng.uniform(-config.max_radius, config.max_radius)
            A[j, j] = p
            poles.append(abs(p))
        B = rng.standard_normal(order)
        C = rng.standard_normal(order)

        g = np.empty(config.horizon)
        x = B.copy()
        for k in range(config.horizon):
            g[k] = C @ x
            x = A @ x
        energy = float(g @ g)
        if not energy > 1e-8:
            continue
        tail = np.sqrt(np.cumsum((g * g)[::-1])[::-1])  # tail[k] = ||g[k:]||
        good = np.flatnonzero(tail <= config.tail_tol * math.sqrt(energy))
        length = int(good[0]) if good.size else config.horizon
        g = g[:max(length, 1)]
        g = g / np.linalg.norm(g)
        radius = float(max(abs(np.linalg.eigvals(A))))
        return SyntheticSystem(g, order, seed, radius)


@dataclass(frozen=True)
class SimulatedData:
    dataset: Dataset
    w: np.ndarray
    v: np.ndarray
    g: np.ndarray


def generate_data(sys: SyntheticSystem, N: int, sigma_u2: float, sigma_y2: float,
                  seed) -> SimulatedData:
    """Unit-variance white input through the system from rest, plus sensor noise.

    Noise is drawn at unit variance and then scaled, so runs that share a seed
    share their noise shapes across noise levels.
    """
    if sigma_u2 < 0 or sigma_y2 < 0:
        raise ValueError("noise variances must be non-negative")
    rng = _rng(seed)
    w = rng.standard_normal(N)
    eta = rng.standard_normal(N)
    eps = rng.standard_normal(N)
    g = sys.g_true
    v = toeplitz(w, N, min(g.size, N)) @ g[:N]
    u = w + math.sqrt(sigma_u2) * eta
    y = v + math.sqrt(sigma_y2) * eps
    return SimulatedData(Dataset.from_arrays(u, y), w, v, g)


def apply_missing(dataset: Dataset, frac_u: float, frac_y: float, seed) -> Dataset:
    """Drop ``floor(frac * N)`` distinct random times from each channel."""
    for f in (frac_u, frac_y):
        if not 0.0 <= f <= 0.9:
            raise ValueError(f"missing fraction must lie in [0, 0.9], got {f}")
    rng = _rng(seed)
    N = dataset.N
    keep = []
    for f in (frac_u, frac_y):
        mask = np.ones(N, dtype=bool)
        mask[rng.choice(N, size=int(math.floor(f * N + 1e-9)), replace=False)] = False
        keep.append(mask)
    return dataset.with_masks(*keep)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    levels: tuple[float, ...] = ()
    runs: int = 50
    N: int = 210
    n: int = 100
    seed: int = 0
    sigma_y2: float = 0.1
    sigma_u2: float = 0.1
    tol_rel: float = 0.01
    max_iter: int = 200

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        levels = tuple(float(x) for x in (self.levels or DEFAULT_LEVELS[self.scenario]))
        lo, hi = LEVEL_RANGE[self.scenario]
        if any(not lo <= x <= hi for x in levels):
            raise ValueError(f"levels for {self.scenario} must lie in [{lo}, {hi}]")
        object.__setattr__(self, "levels", levels)
        if self.runs < 1 or self.N < 1 or self.n < 1:
            raise ValueError("runs, N and n must be positive")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(n=self.n, tol_rel=self.tol_rel, max_iter=self.max_iter)


@dataclass
class RunOutcome:
    level_index: int
    run: int
    status: str  # "ok", "non_identifiable" or "numerical"
    fit_g: float = math.nan
    fit_w: float = math.nan
    fit_v: float = math.nan
    fit_g_naive: float = math.nan
    iterations: int = 0


def _seeds(spec: ScenarioSpec, level_index: int, run: int):
    # systems and clean data depend on the run only, so every level sees the
    # same systems; masks depend on the level as well
    base = np.random.SeedSequence([spec.seed, run])
    sys_seed, data_seed = base.spawn(2)
    mask_seed = np.random.SeedSequence([spec.seed, level_index, run, 1])
    return sys_seed, data_seed, mask_seed


def run_single(spec: ScenarioSpec, level_index: int, run: int) -> RunOutcome:
    level = spec.levels[level_index]
    sys_seed, data_seed, mask_seed = _seeds(spec, level_index, run)
    system = random_system(sys_seed)
    sigma_u2 = level if spec.scenario == "B" else spec.sigma_u2
    sim = generate_data(system, spec.N, sigma_u2, spec.sigma_y2, data_seed)
    frac_u, frac_y = {"A1": (level, 0.0), "A2": (0.0, level),
                      "A3": (level, level), "B": (0.0, 0.0)}[spec.scenario]
    data = apply_missing(sim.dataset, frac_u, frac_y, mask_seed)
    out = RunOutcome(level_index, run, "ok")
    if not check_structural(data, spec.n).structural_ok:
        out.status = "non_identifiable"
        return out
    gamma = spec.sigma_y2 / sigma_u2 if sigma_u2 > 0 else GAMMA_MAX
    cfg = spec.solver_config()
    g_ref = np.zeros(spec.n)
    m = min(spec.n, sim.g.size)
    g_ref[:m] = sim.g[:m]
    try:
        res = run_em(data, min(gamma, GAMMA_MAX), cfg)
        if spec.scenario == "B":
            out.fit_g_naive = fit(naive_identify(data, cfg).g_hat, g_ref)
    except IdentifiabilityError:
        out.status = "non_identifiable"
        return out
    except NumericalFailure as exc:
        log.warning("numerical failure in %s level %g run %d: %s",
                    spec.scenario, level, run, exc)
        out.status = "numerical"
        return out
    out.fit_g = fit(res.g_hat, g_ref)
    out.fit_w = fit(res.w_hat, sim.w)
    out.fit_v = fit(res.v_hat, sim.v)
    out.iterations = res.iterations
    return out


def _run_task(args) -> RunOutcome:
    spec, level_index, run = args
    return run_single(spec, level_index, run)


def _limit_threads():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return
    threadpool_limits(1)


@dataclass
class ScenarioRow:
    scenario: str
    level: float
    runs: int
    median_fit_g: float
    median_fit_w: float
    median_fit_v: float
    median_fit_g_naive: Optional[float]
    non_identifiable: int
    numerical_failures: int = 0
    mean_iterations: float = 0.0


def _med(xs) -> float:
    return median(xs) if xs else math.nan


def run_scenario(spec: ScenarioSpec, jobs: int = 1) -> list[ScenarioRow]:
    """Monte Carlo sweep over ``spec.levels``; one aggregated row per level."""
    tasks = [(spec, i, r) for i in range(len(spec.levels)) for r in range(spec.runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_limit_threads) as pool:
            outcomes = list(pool.map(_run_task, tasks, chunksize=4))
    else:
        outcomes = [_run_task(t) for t in tasks]

    rows = []
    for i, level in enumerate(spec.levels):
        here = [o for o in outcomes if o.level_index == i]
        ok = [o for o in here if o.status == "ok"]
        rows.append(ScenarioRow(
            scenario=spec.scenario,
            level=level,
            runs=spec.runs,
            median_fit_g=_med([o.fit_g for o in ok]),
            median_fit_w=_med([o.fit_w for o in ok]),
            median_fit_v=_med([o.fit_v for o in ok]),
            median_fit_g_naive=_med([o.fit_g_naive for o in ok]) if spec.scenario == "B" else None,
            non_identifiable=sum(o.status == "non_identifiable" for o in here),
            numerical_failures=sum(o.status == "numerical" for o in here),
            mean_iterations=float(np.mean([o.iterations for o in ok])) if ok else 0.0,
        ))
    return rows
