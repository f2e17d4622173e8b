"""Analytic power and sample-size formulas for the differential effect test.

Two families live here.  ``required_n_level1`` and ``required_N1_level2``
size a trial for the test of ``delta = 0``; they solve
``delta^2 / Var(delta-hat) >= (z_{1-alpha/2} + z_{1-beta})^2`` and return
the smallest integer *strictly* greater than the rearranged bound.  The
``required_subgroup_*`` functions size the follow-up tests of the
individual subgroup effects from an ICC profile and return the smallest
integer satisfying the bound as an ordinary ``>=`` inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

from .design import LEVEL_ONE, LEVEL_TWO, Design, IccProfile, SubgroupLevel, VarianceComponents
from .errors import DomainError, Infeasible, InvalidDesign
from .estimate import var_delta_formula
from .inference import critical_value, normal_cdf, normal_quantile

__all__ = [
    "PowerSpec",
    "SubgroupPowerSpec",
    "SampleSize",
    "var_delta_formula",
    "power_lower_bound",
    "required_n_level1",
    "required_N1_level2",
    "required_subgroup_n_level1",
    "required_subgroup_n_level2",
    "power_curve",
    "smallest_integer_above",
]

# Estimator preconditions: n >= 2 per subgroup, N1 >= 2.
MIN_SIZE = 2


@dataclass(frozen=True)
class PowerSpec:
    """Target of a sample-size calculation for the differential effect.

    ``one_sided_quantile`` replaces ``z_{1-alpha/2}`` by ``z_{1-alpha}``.
    """

    alpha: float
    power: float
    delta: float
    one_sided_quantile: bool = False

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not 0 < self.power < 1:
            raise DomainError(f"power must lie in (0, 1), got {self.power!r}")
        if self.power <= self.alpha:
            raise DomainError("power must exceed alpha")

    @property
    def z_alpha(self) -> float:
        if self.one_sided_quantile:
            return normal_quantile(1.0 - self.alpha)
        return critical_value(self.alpha)

    @property
    def z_sum_sq(self) -> float:
        """``(z_alpha + z_{1-beta})^2``, the noncentrality the design must reach."""
        return (self.z_alpha + normal_quantile(self.power)) ** 2

    @property
    def threshold(self) -> float:
        """Largest admissible ``Var(delta-hat)``: ``delta^2 / (z + z)^2``."""
        return self.delta**2 / self.z_sum_sq


@dataclass(frozen=True)
class SubgroupPowerSpec:
    """Target for the test of one subgroup's treatment effect.

    ``delta_g_over_sigma`` is the signal-to-noise ratio ``|delta_g| / sigma``.
    By default the one-sided quantile ``z_{1-alpha_g}`` is used; set
    ``two_sided_quantile`` to use ``z_{1-alpha_g/2}`` instead.
    """

    alpha_g: float
    power: float
    delta_g_over_sigma: float
    two_sided_quantile: bool = False

    def __post_init__(self):
        if not 0 < self.alpha_g < 1:
            raise DomainError(f"alpha_g must lie in (0, 1), got {self.alpha_g!r}")
        if not 0 < self.power < 1:
            raise DomainError(f"power must lie in (0, 1), got {self.power!r}")
        if not self.delta_g_over_sigma > 0:
            raise DomainError("delta_g_over_sigma must be positive")

    @property
    def z_sum_sq(self) -> float:
        if self.two_sided_quantile:
            z_a = critical_value(self.alpha_g)
        else:
            z_a = normal_quantile(1.0 - self.alpha_g)
        return (z_a + normal_quantile(self.power)) ** 2


@dataclass(frozen=True)
class SampleSize:
    """Outcome of a sample-size formula.

    ``minimal`` is what the formula yields; ``size`` is that value raised to
    the estimator's minimum of 2 when needed (``clamped`` records this).
    ``bound`` is the real-valued right-hand side before rounding.
    """

    minimal: int
    size: int
    clamped: bool
    bound: float

    def to_dict(self) -> dict:
        return {
            "status": "ok",
            "minimal": self.minimal,
            "size": self.size,
            "clamped": self.clamped,
            "bound": self.bound,
        }


def smallest_integer_above(x: float) -> int:
    """Smallest integer strictly greater than ``x``."""
    return math.floor(x) + 1


def _result(minimal: int, bound: float) -> SampleSize:
    minimal = max(int(minimal), 1)
    size = max(minimal, MIN_SIZE)
    return SampleSize(minimal=minimal, size=size, clamped=size != minimal, bound=bound)


def power_lower_bound(delta: float, var_delta: float, alpha: float) -> float:
    """``Phi(|delta| / sqrt(var_delta) - z_{1-alpha/2})``."""
    if not var_delta > 0:
        raise DomainError(f"var_delta must be positive, got {var_delta!r}")
    return normal_cdf(abs(delta) / math.sqrt(var_delta) - critical_value(alpha))


def _solve_strict(a: float, b: float, threshold: float) -> SampleSize:
    # Var = a / s + b must drop below threshold.
    if threshold <= b:
        raise Infeasible("B >= threshold")
    bound = a / (threshold - b)
    return _result(smallest_integer_above(bound), bound)


def required_n_level1(spec: PowerSpec, n3: int, n2: int, vc: VarianceComponents) -> SampleSize:
    """Level-one units per subgroup per level-two unit (subgrouping at level one).

    With ``A = 4 sigma_e^2 / (N3 N2)`` and ``B = 4 sigma_grp^2 / N3`` the
    variance is ``A / n + B``.  Raises :class:`Infeasible` when
    ``delta^2 / (z + z)^2 <= B``.
    """
    if vc.level is not LEVEL_ONE:
        raise DomainError("components must be for level-one subgrouping")
    _check_counts(n3=n3, n2=n2)
    a = 4.0 * vc.sigma_e_sq / (n3 * n2)
    b = 4.0 * vc.sigma_low_sq / n3
    return _solve_strict(a, b, spec.threshold)


def required_N1_level2(spec: PowerSpec, n3: int, n: int, vc: VarianceComponents) -> SampleSize:
    """Level-one units per level-two unit (subgrouping at level two).

    ``A' = 4 sigma_e^2 / (N3 n)``, ``B' = 4 (sigma_1^2 + n sigma_2^2) / (N3 n)``.
    """
    if vc.level is not LEVEL_TWO:
        raise DomainError("components must be for level-two subgrouping")
    _check_counts(n3=n3, n=n)
    a = 4.0 * vc.sigma_e_sq / (n3 * n)
    b = 4.0 * (vc.sigma_low_sq + n * vc.sigma2_sq) / (n3 * n)
    return _solve_strict(a, b, spec.threshold)


def _solve_ge(numer: float, denom: float) -> SampleSize:
    if denom <= 0:
        raise Infeasible("denominator <= 0")
    bound = numer / denom
    return _result(math.ceil(bound), bound)


def required_subgroup_n_level1(spec: SubgroupPowerSpec, n2: int, n3: int, icc: IccProfile) -> SampleSize:
    """Level-one units ``N_1g`` in subgroup ``g`` for its own effect test."""
    icc.validate(LEVEL_ONE)
    _check_counts(n3=n3, n2=n2)
    zz2 = 2.0 * spec.z_sum_sq
    numer = zz2 * (1.0 - icc.rho1)
    denom = spec.delta_g_over_sigma**2 * n2 * n3 - zz2 * (icc.rho1 + (n2 - 1) * icc.rho_2p)
    return _solve_ge(numer, denom)


def required_subgroup_n_level2(spec: SubgroupPowerSpec, n1: int, n3: int, icc: IccProfile) -> SampleSize:
    """Level-two units ``N_2g`` in subgroup ``g`` for its own effect test."""
    icc.validate(LEVEL_TWO)
    _check_counts(n3=n3, n1=n1)
    zz2 = 2.0 * spec.z_sum_sq
    numer = zz2 * (1.0 - icc.rho1 + (icc.rho1 - icc.rho_2p) * n1)
    denom = spec.delta_g_over_sigma**2 * n1 * n3 - zz2 * icc.rho_2p * n1
    return _solve_ge(numer, denom)


def _check_counts(**counts: int) -> None:
    for name, value in counts.items():
        if isinstance(value, bool) or int(value) != value or value < 1:
            raise InvalidDesign(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class PowerRow:
    design: Design
    var_delta: float
    power: float

    def to_dict(self) -> dict:
        n3, a, b = self.design.triple
        keys = ("n3", "n2", "n") if self.design.subgroup_level is LEVEL_ONE else ("n3", "n", "n1")
        return {**dict(zip(keys, (n3, a, b))), "var_delta": self.var_delta, "power": self.power}


def power_curve(
    spec: PowerSpec,
    design_range: dict[str, Sequence[int] | Iterable[int]],
    vc: VarianceComponents,
) -> list[PowerRow]:
    """Analytic power over the Cartesian product of the given size ranges.

    ``design_range`` maps ``n3`` plus ``n2``/``n`` (level one) or ``n``/``n1``
    (level two) to iterables of integers; the level comes from ``vc``.
    """
    level = SubgroupLevel.parse(vc.level)
    names = ("n3", "n2", "n") if level is LEVEL_ONE else ("n3", "n", "n1")
    missing = [k for k in names if k not in design_range]
    if missing:
        raise DomainError(f"design_range lacks {', '.join(missing)}")
    build = Design.level_one if level is LEVEL_ONE else Design.level_two
    rows = []
    for triple in product(*(list(design_range[k]) for k in names)):
        design = build(*triple)
        var = var_delta_formula(design, vc)
        power = power_lower_bound(spec.delta, var, spec.alpha) if var > 0 else 1.0
        rows.append(PowerRow(design, var, power))
    return rows
