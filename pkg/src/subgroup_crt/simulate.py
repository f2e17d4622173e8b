"""Synthetic balanced trial data and deterministic seeding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import Design, FixedEffects, VarianceComponents
from .errors import InvalidDesign

MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    # SplitMix64 finalizer (a bijection on 64-bit words)
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def substream_seed(master: int, replicate_index: int) -> int:
    """Seed of replicate ``replicate_index`` derived from ``master``.

    ``mix64(master + (index + 1) * 0x9E3779B97F4A7C15 mod 2**64)`` where
    ``mix64`` is the SplitMix64 output function.  For a fixed master seed the
    map is injective over all 64-bit indices.  Frozen: changing it changes
    every published Monte Carlo number.
    """
    if replicate_index < 0:
        raise ValueError("replicate_index must be >= 0")
    z = (int(master) + (int(replicate_index) + 1) * _GOLDEN_GAMMA) & MASK64
    return _mix64(z)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed; normals come from numpy's ziggurat."""
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


@dataclass(frozen=True)
class TrialData:
    """Outcomes of a balanced trial in the layout documented in :mod:`.design`.

    ``y[design.index(i, a, b, k)]`` is the outcome of level-three unit ``i``
    (treated iff ``i < N3``); ``(a, b) = (j, g)`` for level-one subgrouping
    and ``(g, j)`` for level-two subgrouping.  Subgroup index 0 is Subgroup 1.
    """

    design: Design
    y: np.ndarray = field(repr=False)

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if y.size != self.design.n_obs:
            raise InvalidDesign(f"expected {self.design.n_obs} outcomes, got {y.size}")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def cells(self) -> np.ndarray:
        """Read-only view of shape ``design.shape``."""
        return self.y.reshape(self.design.shape)

    def transformed(self, scale: float = 1.0, shift: float = 0.0, treated_shift: float = 0.0) -> "TrialData":
        y = self.cells * scale + shift
        if treated_shift:
            y = y.copy()
            y[: self.design.n3_per_arm] += treated_shift
        return TrialData(self.design, y)


def mean_array(design: Design, fx: FixedEffects) -> np.ndarray:
    """Fixed-effect mean of every observation, shape ``design.shape``."""
    arm_sub = np.array(
        [[fx.cell_mean(treated, g) for g in (1, 2)] for treated in (True, False)]
    )
    n3 = design.n3_per_arm
    per_i = np.repeat(arm_sub, n3, axis=0)  # (2N3, 2)
    if design.subgroup_axis == 2:
        return np.broadcast_to(per_i[:, None, :, None], design.shape)
    return np.broadcast_to(per_i[:, :, None, None], design.shape)


def simulate_noise(design: Design, vc: VarianceComponents, rng: np.random.Generator) -> np.ndarray:
    """Random part of the outcomes.

    Draw order (frozen): level-three intercepts, then the next level down,
    then the innermost random intercepts, then the errors, each in C order.
    """
    vc.check_level(design)
    n3x2, d1, d2, d3 = design.shape
    u3 = rng.standard_normal(n3x2) * np.sqrt(vc.sigma3_sq)
    u2 = rng.standard_normal((n3x2, d1)) * np.sqrt(vc.sigma2_sq)
    u1 = rng.standard_normal((n3x2, d1, d2)) * np.sqrt(vc.sigma_low_sq)
    eps = rng.standard_normal(design.shape) * np.sqrt(vc.sigma_e_sq)
    re = (u3[:, None] + u2)[:, :, None] + u1
    return eps + re[..., None]


def simulate(design: Design, fx: FixedEffects, vc: VarianceComponents, seed: int) -> TrialData:
    """One dataset from the random-intercept model; deterministic in ``seed``."""
    vc.check_level(design)
    noise = simulate_noise(design, vc, make_rng(seed))
    return TrialData(design, mean_array(design, fx) + noise)
