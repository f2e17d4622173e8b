"""Monte Carlo size and power of the differential effect test.

Replicate ``r`` of a run with master seed ``s`` draws its random effects from
``substream_seed(s, r)``, so results do not depend on how replicates are
split across worker processes.  When several effect sizes are evaluated
together (``run_grid``) every effect size reuses the same random effects
(common random numbers); each column is then identical to a separate
:func:`run_mc` call with the same seed.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .design import LEVEL_ONE, LEVEL_TWO, Design, FixedEffects, SubgroupLevel, VarianceComponents, setting_components
from .estimate import fit
from .inference import critical_value
from .simulate import TrialData, make_rng, mean_array, simulate_noise, substream_seed

WORKERS_ENV = "SUBGROUP_CRT_WORKERS"


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


@dataclass(frozen=True)
class McConfig:
    design: Design
    fx: FixedEffects
    vc: VarianceComponents
    alpha: float = 0.05
    replicates: int = 1000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class McResult:
    """Rejection count over the replicates where the test was defined."""

    rejections: int
    replicates: int
    degenerate_count: int = 0

    @property
    def valid(self) -> int:
        return self.replicates - self.degenerate_count

    @property
    def empirical_power(self) -> float:
        return self.rejections / self.valid if self.valid else float("nan")

    @property
    def binomial_se(self) -> float:
        p = self.empirical_power
        return math.sqrt(p * (1.0 - p) / self.valid) if self.valid else float("nan")

    def to_dict(self) -> dict:
        return {
            "empirical_power": self.empirical_power,
            "rejections": self.rejections,
            "replicates": self.replicates,
            "degenerate_count": self.degenerate_count,
            "binomial_se": self.binomial_se,
        }


def _count_chunk(args) -> np.ndarray:
    """``counts[e] = (rejections, degenerate)`` for replicates ``start..stop-1``."""
    design, vc, fxs, alpha, seed, start, stop = args
    crit = critical_value(alpha)
    means = [mean_array(design, fx) for fx in fxs]
    counts = np.zeros((len(fxs), 2), dtype=np.int64)
    for r in range(start, stop):
        noise = simulate_noise(design, vc, make_rng(substream_seed(seed, r)))
        for e, mean in enumerate(means):
            _, est = fit(TrialData(design, mean + noise))
            if not est.var_hat > 0:
                counts[e, 1] += 1
            elif abs(est.delta_hat / math.sqrt(est.var_hat)) > crit:
                counts[e, 0] += 1
    return counts


def _chunks(n: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_grid(
    design: Design,
    vc: VarianceComponents,
    fxs: Sequence[FixedEffects],
    alpha: float = 0.05,
    replicates: int = 1000,
    seed: int = 0,
    workers: int = 1,
) -> list[McResult]:
    """One :class:`McResult` per fixed-effect vector, sharing random draws."""
    vc.check_level(design)
    fxs = list(fxs)
    jobs = [(design, vc, fxs, alpha, seed, a, b) for a, b in _chunks(replicates, workers * 4 if workers > 1 else 1)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_count_chunk, jobs))
    else:
        parts = [_count_chunk(job) for job in jobs]
    total = np.sum(parts, axis=0)
    return [McResult(int(rej), replicates, int(deg)) for rej, deg in total]


def run_mc(config: McConfig) -> McResult:
    """Empirical rejection rate of the test under ``config``."""
    return run_grid(
        config.design, config.vc, [config.fx], config.alpha, config.replicates, config.seed, config.workers
    )[0]


# Published empirical power, 1000 replicates per cell:
# (N3, N2, n) or (N3, n, N1) -> {setting: (delta=0, delta=0.5, delta=1)}
PUBLISHED_TABLES: dict[int, dict[tuple[int, int, int], dict[str, tuple[float, float, float]]]] = {
    1: {
        (5, 6, 15): {"I": (0.002, 0.756, 1), "II": (0.015, 0.941, 1)},
        (5, 6, 20): {"I": (0.002, 0.789, 1), "II": (0.009, 0.956, 1)},
        (5, 6, 25): {"I": (0.001, 0.807, 1), "II": (0.004, 0.976, 1)},
        (5, 7, 15): {"I": (0.001, 0.787, 1), "II": (0.011, 0.954, 1)},
        (5, 7, 20): {"I": (0.001, 0.799, 1), "II": (0.001, 0.974, 1)},
        (5, 7, 25): {"I": (0.001, 0.824, 1), "II": (0.006, 0.982, 1)},
        (6, 7, 15): {"I": (0.003, 0.877, 1), "II": (0.006, 0.978, 1)},
        (6, 7, 20): {"I": (0, 0.901, 1), "II": (0.003, 0.991, 1)},
        (6, 7, 25): {"I": (0, 0.931, 1), "II": (0.002, 0.995, 1)},
        (6, 8, 15): {"I": (0.002, 0.87, 1), "II": (0.004, 0.99, 1)},
        (6, 8, 20): {"I": (0, 0.912, 1), "II": (0, 0.994, 1)},
        (6, 8, 25): {"I": (0, 0.933, 1), "II": (0.001, 0.995, 1)},
    },
    2: {
        (10, 15, 20): {"I": (0.076, 0.925, 1), "II": (0.079, 0.997, 1)},
        (10, 15, 30): {"I": (0.072, 0.923, 1), "II": (0.069, 0.996, 1)},
        (10, 15, 40): {"I": (0.078, 0.928, 1), "II": (0.075, 0.998, 1)},
        (20, 15, 20): {"I": (0.069, 0.997, 1), "II": (0.068, 1, 1)},
        (20, 15, 30): {"I": (0.067, 0.996, 1), "II": (0.065, 1, 1)},
        (20, 15, 40): {"I": (0.062, 0.998, 1), "II": (0.062, 1, 1)},
        (40, 20, 20): {"I": (0.054, 1, 1), "II": (0.049, 1, 1)},
        (40, 20, 30): {"I": (0.064, 1, 1), "II": (0.064, 1, 1)},
        (40, 20, 40): {"I": (0.058, 1, 1), "II": (0.058, 1, 1)},
        (60, 20, 20): {"I": (0.042, 1, 1), "II": (0.045, 1, 1)},
        (60, 20, 30): {"I": (0.042, 1, 1), "II": (0.036, 1, 1)},
        (60, 20, 40): {"I": (0.051, 1, 1), "II": (0.051, 1, 1)},
    },
}
PUBLISHED_REPLICATES = 1000
DELTAS = (0.0, 0.5, 1.0)
SETTING_NAMES = ("I", "II")
BASE_FX = FixedEffects(beta0=0.0, tau=0.0, xi=0.5, delta=0.0)
HIGH_POWER_FLOOR = 0.99


def reproduction_tolerance(published: float, observed: float, reps: int, published_reps: int = PUBLISHED_REPLICATES) -> float:
    """Three standard errors of the difference of two binomial proportions.

    Both the published value and ours are Monte Carlo estimates, so their
    variances add.
    """
    var = published * (1.0 - published) / published_reps + observed * (1.0 - observed) / reps
    return 3.0 * math.sqrt(var)


@dataclass(frozen=True)
class ReproRow:
    table: int
    sizes: tuple[int, int, int]
    delta: float
    setting: str
    result: McResult
    published: float
    tolerance: float

    @property
    def empirical_power(self) -> float:
        return self.result.empirical_power

    @property
    def abs_diff(self) -> float:
        return abs(self.empirical_power - self.published)

    @property
    def ci(self) -> tuple[float, float]:
        p, se = self.empirical_power, self.result.binomial_se
        return (max(0.0, p - 1.96 * se), min(1.0, p + 1.96 * se))

    @property
    def within(self) -> bool:
        if self.delta == 1.0:
            return self.empirical_power >= HIGH_POWER_FLOOR
        return self.abs_diff <= self.tolerance + 1e-12

    def to_dict(self) -> dict:
        lo, hi = self.ci
        return {
            "table": self.table,
            "sizes": list(self.sizes),
            "delta": self.delta,
            "setting": self.setting,
            "empirical_power": self.empirical_power,
            "rejections": self.result.rejections,
            "replicates": self.result.replicates,
            "degenerate_count": self.result.degenerate_count,
            "ci_low": lo,
            "ci_high": hi,
            "published": self.published,
            "abs_diff": self.abs_diff,
            "tolerance": self.tolerance,
            "within": self.within,
        }


def table_design(which: int, sizes: tuple[int, int, int]) -> Design:
    return Design.level_one(*sizes) if which == 1 else Design.level_two(*sizes)


def reproduce_table(
    which: int,
    seed: int = 0,
    replicates: int = PUBLISHED_REPLICATES,
    workers: int = 1,
    alpha: float = 0.05,
) -> list[ReproRow]:
    """Rerun every published cell of table 1 (level-one subgrouping) or 2 (level two).

    Cell ``k`` (settings outer, designs in published order inner) uses master
    seed ``substream_seed(seed, k)``; the three effect sizes of a cell share
    random draws.
    """
    if which not in PUBLISHED_TABLES:
        raise ValueError(f"unknown table {which!r}")
    level = LEVEL_ONE if which == 1 else LEVEL_TWO
    rows: list[ReproRow] = []
    k = 0
    for setting in SETTING_NAMES:
        vc = setting_components(setting, level)
        for sizes, values in PUBLISHED_TABLES[which].items():
            design = table_design(which, sizes)
            fxs = [replace(BASE_FX, delta=d) for d in DELTAS]
            results = run_grid(design, vc, fxs, alpha, replicates, substream_seed(seed, k), workers)
            for delta, res, published in zip(DELTAS, results, values[setting]):
                tol = reproduction_tolerance(published, res.empirical_power, res.valid)
                rows.append(ReproRow(which, sizes, delta, setting, res, float(published), tol))
            k += 1
    return rows


def summarize(rows: Sequence[ReproRow]) -> dict:
    within = sum(r.within for r in rows)
    high = [r for r in rows if r.delta == 1.0]
    return {
        "rows": len(rows),
        "within": within,
        "fraction_within": within / len(rows) if rows else float("nan"),
        "high_power_ok": all(r.empirical_power >= HIGH_POWER_FLOOR for r in high),
    }


def level_of_table(which: int) -> SubgroupLevel:
    return LEVEL_ONE if which == 1 else LEVEL_TWO
