"""Closed-form estimation: sums of squares, variance-component MLEs, delta-hat."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .design import LEVEL_ONE, Design, FixedEffects, VarianceComponents
from .simulate import TrialData


@dataclass(frozen=True)
class SumsOfSquares:
    ss0: float
    ss1: float
    ss2: float
    ss3: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.ss0, self.ss1, self.ss2, self.ss3)


class RawComponents(NamedTuple):
    """Untruncated estimates; anything but ``sigma_e_sq`` may be negative."""

    sigma3_sq: float
    sigma2_sq: float
    sigma_low_sq: float
    sigma_e_sq: float


@dataclass(frozen=True)
class ComponentEstimates:
    vc_hat: VarianceComponents
    raw: RawComponents
    truncated: tuple[bool, bool, bool, bool]
    lambdas: tuple[float, float, float, float]


@dataclass(frozen=True)
class DeltaEstimate:
    delta_hat: float
    delta1_hat: float
    delta2_hat: float
    var_hat: float
    fx_hat: FixedEffects

    @property
    def se(self) -> float:
        return float(np.sqrt(self.var_hat))


def _arm_split(x: np.ndarray, n3: int) -> tuple[np.ndarray, np.ndarray]:
    return x[:n3], x[n3:]


def _dev_from_arm_mean(x: np.ndarray, n3: int) -> float:
    """Sum over units of squared deviations from their own arm's mean."""
    t, c = _arm_split(x, n3)
    return float(np.sum((t - t.mean()) ** 2) + np.sum((c - c.mean()) ** 2))


def sums_of_squares(data: TrialData, printed_ss0: bool = False) -> SumsOfSquares:
    """SS0..SS3 of the balanced layout.

    For level-two subgrouping SS0 defaults to the within-cell residual sum
    ``sum (Y_igjk - Ybar_igj.)^2``; ``printed_ss0=True`` switches to
    ``N1 * sum (Ybar_igj. - Ybar_....)^2``, which does not maximise the
    likelihood and is kept only for comparison.
    """
    design = data.design
    # centring on one observation keeps constant data exactly at zero and
    # limits cancellation when outcomes carry a large common offset
    y = data.cells - data.y[0]
    n3 = design.n3_per_arm
    n = design.n
    cell = y.mean(axis=3)
    ss0 = float(np.sum((y - cell[..., None]) ** 2))
    if design.subgroup_level is LEVEL_ONE:
        # cell[i, j, g]
        n2 = design.mid
        diff = cell[:, :, 0] - cell[:, :, 1]
        ss1 = n * _dev_from_arm_mean(diff, n3)
        unit2 = cell.mean(axis=2)
        unit3 = unit2.mean(axis=1)
        ss2 = 2 * n * float(np.sum((unit2 - unit3[:, None]) ** 2))
        ss3 = n2 * 2 * n * _dev_from_arm_mean(unit3, n3)
    else:
        # cell[i, g, j]
        n1 = design.low
        if printed_ss0:
            ss0 = n1 * float(np.sum((cell - y.mean()) ** 2))
        sub = cell.mean(axis=2)
        ss1 = n1 * float(np.sum((cell - sub[..., None]) ** 2))
        diff = sub[:, 0] - sub[:, 1]
        ss2 = n * n1 * _dev_from_arm_mean(diff, n3)
        unit3 = sub.mean(axis=1)
        ss3 = 2 * n * n1 * _dev_from_arm_mean(unit3, n3)
    return SumsOfSquares(ss0, ss1, ss2, ss3)


def lambda_hats(ss: SumsOfSquares, design: Design) -> tuple[float, float, float, float]:
    """ML estimates of the four covariance eigenvalues (each SS over its multiplicity)."""
    n3x2 = 2 * design.n3_per_arm
    n = design.n
    if design.subgroup_level is LEVEL_ONE:
        n2 = design.mid
        return (
            ss.ss0 / (n3x2 * n2 * 2 * (n - 1)),
            ss.ss1 / (n3x2 * n2 * 2),
            ss.ss2 / (n3x2 * (n2 - 1)),
            ss.ss3 / n3x2,
        )
    n1 = design.low
    return (
        ss.ss0 / (n3x2 * 2 * n * (n1 - 1)),
        ss.ss1 / (n3x2 * 2 * (n - 1)),
        ss.ss2 / (n3x2 * 2),
        ss.ss3 / n3x2,
    )


def variance_components_mle(
    ss: SumsOfSquares, design: Design, printed_sigma2: bool = False
) -> ComponentEstimates:
    """Closed-form MLEs of the variance components, truncated at zero.

    For level-one subgrouping the level-two variance is
    ``(lambda2 - lambda1) / (2n)``; ``printed_sigma2=True`` divides by ``n``
    instead, which is not the likelihood maximiser.
    """
    lam0, lam1, lam2, lam3 = lambda_hats(ss, design)
    n = design.n
    if design.subgroup_level is LEVEL_ONE:
        n2 = design.mid
        low = (lam1 - lam0) / n
        mid = (lam2 - lam1) / (n if printed_sigma2 else 2 * n)
        top = (lam3 - lam2) / (n2 * 2 * n)
    else:
        n1 = design.low
        low = (lam1 - lam0) / n1
        mid = (lam2 - lam1) / (n * n1)
        top = (lam3 - lam2) / (2 * n * n1)
    raw = RawComponents(top, mid, low, lam0)
    flags = tuple(bool(v < 0) for v in raw)
    vc = VarianceComponents(*(max(v, 0.0) for v in raw), design.subgroup_level)
    return ComponentEstimates(vc, raw, flags, (lam0, lam1, lam2, lam3))


def var_delta_formula(design: Design, vc: VarianceComponents) -> float:
    """Closed-form variance of delta-hat for known components."""
    vc.check_level(design)
    n3 = design.n3_per_arm
    n = design.n
    if design.subgroup_level is LEVEL_ONE:
        n2 = design.mid
        return 4.0 * (vc.sigma_e_sq + n * n2 * vc.sigma_low_sq) / (n3 * n2 * n)
    n1 = design.low
    return 4.0 * (vc.sigma_e_sq + n1 * vc.sigma_low_sq + n * n1 * vc.sigma2_sq) / (n3 * n * n1)


def subgroup_arm_means(data: TrialData) -> np.ndarray:
    """``out[arm, g]``: mean outcome by arm (0 treated, 1 control) and subgroup."""
    design = data.design
    y = data.cells
    n3 = design.n3_per_arm
    axes = (1, 3) if design.subgroup_level is LEVEL_ONE else (2, 3)
    per_i = y.mean(axis=axes)  # (2N3, 2)
    return np.stack([per_i[:n3].mean(axis=0), per_i[n3:].mean(axis=0)])


def estimate_delta(data: TrialData, comp: ComponentEstimates) -> DeltaEstimate:
    means = subgroup_arm_means(data)
    (t1, t2), (c1, c2) = means
    delta1 = float(t1 - c1)
    delta2 = float(t2 - c2)
    delta = delta1 - delta2
    tau = float(c1 - c2)
    mean_t = float((t1 + t2) / 2)
    mean_c = float((c1 + c2) / 2)
    fx = FixedEffects(beta0=mean_c - tau / 2, tau=tau, xi=mean_t - mean_c - delta / 2, delta=delta)
    return DeltaEstimate(
        delta_hat=delta,
        delta1_hat=delta1,
        delta2_hat=delta2,
        var_hat=var_delta_formula(data.design, comp.vc_hat),
        fx_hat=fx,
    )


def fit(data: TrialData, printed_ss0: bool = False, printed_sigma2: bool = False) -> tuple[ComponentEstimates, DeltaEstimate]:
    """Sums of squares, component MLEs and delta-hat in one call."""
    ss = sums_of_squares(data, printed_ss0=printed_ss0)
    comp = variance_components_mle(ss, data.design, printed_sigma2=printed_sigma2)
    return comp, estimate_delta(data, comp)
