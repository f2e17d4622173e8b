"""Trial dimensions, fixed effects, variance components and ICC profiles.

Both models share one nested layout.  Observations are stored as an array of
shape ``(2*N3, d1, d2, d3)``:

* subgrouping at level one:  ``(i, j, g, k)`` with ``d1 = N2``, ``d2 = 2``,
  ``d3 = n`` (``n`` level-one units per subgroup per level-two unit);
* subgrouping at level two:  ``(i, g, j, k)`` with ``d1 = 2``, ``d2 = n``,
  ``d3 = N1`` (``n`` level-two units per subgroup per level-three unit).

Level-three units ``i < N3`` are treated, the rest are controls.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import InvalidComponents, InvalidDesign, InvalidIcc, LevelMismatch

ICC_TOL = 1e-12


class SubgroupLevel(enum.Enum):
    LEVEL_ONE = 1
    LEVEL_TWO = 2

    @classmethod
    def parse(cls, value: "SubgroupLevel | int | str") -> "SubgroupLevel":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        if text in ("1", "one", "level_one", "levelone", "level1"):
            return cls.LEVEL_ONE
        if text in ("2", "two", "level_two", "leveltwo", "level2"):
            return cls.LEVEL_TWO
        raise ValueError(f"unknown subgroup level {value!r}")


LEVEL_ONE = SubgroupLevel.LEVEL_ONE
LEVEL_TWO = SubgroupLevel.LEVEL_TWO


@dataclass(frozen=True)
class Design:
    """Balanced three-level design.

    ``mid`` is the number of level-two units per level-three unit (``N2`` for
    level-one subgrouping, ``2n`` for level-two subgrouping) and ``low`` the
    number of level-one units per level-two unit (``2n`` resp. ``N1``).
    """

    n3_per_arm: int
    mid: int
    low: int
    subgroup_level: SubgroupLevel

    def __post_init__(self):
        level = SubgroupLevel.parse(self.subgroup_level)
        object.__setattr__(self, "subgroup_level", level)
        for name in ("n3_per_arm", "mid", "low"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise InvalidDesign(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        split = self.low if level is LEVEL_ONE else self.mid
        other = self.mid if level is LEVEL_ONE else self.low
        split_name = "low" if level is LEVEL_ONE else "mid"
        other_name = "N2" if level is LEVEL_ONE else "N1"
        if split % 2:
            raise InvalidDesign(f"{split_name} must be even (two equal subgroups), got {split}")
        if split // 2 < 2:
            raise InvalidDesign(f"per-subgroup count n must be >= 2, got {split // 2}")
        if other < 2:
            raise InvalidDesign(f"{other_name} must be >= 2, got {other}")

    @classmethod
    def level_one(cls, n3: int, n2: int, n: int) -> "Design":
        """Design from the ``(N3, N2, n)`` triple used for level-one subgrouping."""
        return cls(n3, n2, 2 * n, LEVEL_ONE)

    @classmethod
    def level_two(cls, n3: int, n: int, n1: int) -> "Design":
        """Design from the ``(N3, n, N1)`` triple used for level-two subgrouping."""
        return cls(n3, 2 * n, n1, LEVEL_TWO)

    @property
    def n(self) -> int:
        """Units per subgroup at the subgrouped level."""
        return (self.low if self.subgroup_level is LEVEL_ONE else self.mid) // 2

    @property
    def n2(self) -> int:
        return self.mid

    @property
    def n1(self) -> int:
        return self.low

    @property
    def triple(self) -> tuple[int, int, int]:
        """``(N3, N2, n)`` for level one, ``(N3, n, N1)`` for level two."""
        if self.subgroup_level is LEVEL_ONE:
            return (self.n3_per_arm, self.mid, self.n)
        return (self.n3_per_arm, self.n, self.low)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        n3x2 = 2 * self.n3_per_arm
        if self.subgroup_level is LEVEL_ONE:
            return (n3x2, self.mid, 2, self.n)
        return (n3x2, 2, self.n, self.low)

    @property
    def n_obs(self) -> int:
        return 2 * self.n3_per_arm * self.mid * self.low

    @property
    def subgroup_axis(self) -> int:
        """Axis of :attr:`shape` that carries the subgroup index."""
        return 2 if self.subgroup_level is LEVEL_ONE else 1

    def index(self, i: int, a: int, b: int, k: int) -> int:
        """Flat position of observation ``(i, a, b, k)`` (all zero-based).

        ``(a, b)`` is ``(j, g)`` for level one and ``(g, j)`` for level two.
        """
        _, d1, d2, d3 = self.shape
        return ((i * d1 + a) * d2 + b) * d3 + k

    def arm(self, i: int) -> int:
        """1 for treated level-three units (the first ``N3``), else 0."""
        return int(i < self.n3_per_arm)

    def to_dict(self) -> dict:
        return {
            "level": self.subgroup_level.value,
            "n3_per_arm": self.n3_per_arm,
            "mid": self.mid,
            "low": self.low,
            "n": self.n,
        }


@dataclass(frozen=True)
class FixedEffects:
    beta0: float = 0.0
    tau: float = 0.0
    xi: float = 0.0
    delta: float = 0.0

    @property
    def delta1(self) -> float:
        """Treatment effect on Subgroup 1."""
        return self.xi + self.delta

    @property
    def delta2(self) -> float:
        """Treatment effect on Subgroup 2."""
        return self.xi

    def cell_mean(self, treated: bool, subgroup: int) -> float:
        mean = self.beta0
        if subgroup == 1:
            mean += self.tau
        if treated:
            mean += self.xi
            if subgroup == 1:
                mean += self.delta
        return mean

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.beta0, self.tau, self.xi, self.delta)

    def to_dict(self) -> dict:
        return {"beta0": self.beta0, "tau": self.tau, "xi": self.xi, "delta": self.delta}


@dataclass(frozen=True)
class VarianceComponents:
    """Random-intercept variances, outermost first.

    ``sigma_low_sq`` is the subgroup-within-level-two variance for level-one
    subgrouping and the level-two-unit variance for level-two subgrouping.
    """

    sigma3_sq: float
    sigma2_sq: float
    sigma_low_sq: float
    sigma_e_sq: float
    level: SubgroupLevel

    def __post_init__(self):
        object.__setattr__(self, "level", SubgroupLevel.parse(self.level))
        for name in ("sigma3_sq", "sigma2_sq", "sigma_low_sq", "sigma_e_sq"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise InvalidComponents(f"{name} must be finite and >= 0, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def total(self) -> float:
        return self.sigma3_sq + self.sigma2_sq + self.sigma_low_sq + self.sigma_e_sq

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.sigma3_sq, self.sigma2_sq, self.sigma_low_sq, self.sigma_e_sq)

    def scaled(self, factor: float) -> "VarianceComponents":
        return VarianceComponents(*(factor * v for v in self.as_tuple()), self.level)

    def check_level(self, design: Design) -> None:
        if self.level is not design.subgroup_level:
            raise LevelMismatch(
                f"components are for {self.level.name}, design is {design.subgroup_level.name}"
            )

    def to_dict(self) -> dict:
        low = "sigma_grp_sq" if self.level is LEVEL_ONE else "sigma1_sq"
        return {
            "sigma3_sq": self.sigma3_sq,
            "sigma2_sq": self.sigma2_sq,
            low: self.sigma_low_sq,
            "sigma_e_sq": self.sigma_e_sq,
        }


@dataclass(frozen=True)
class IccProfile:
    """Total variance plus intra-class correlations.

    ``rho_1p`` (same level-two unit, different subgroup) only exists for
    level-one subgrouping and must be ``None`` otherwise.
    """

    sigma_sq: float
    rho1: float
    rho_2p: float
    rho2: float
    rho_1p: float | None = None

    def validate(self, level: SubgroupLevel) -> None:
        level = SubgroupLevel.parse(level)
        t = ICC_TOL
        if not (self.sigma_sq > 0 and math.isfinite(self.sigma_sq)):
            raise InvalidIcc(f"sigma_sq must be positive, got {self.sigma_sq!r}")
        if level is LEVEL_ONE:
            if self.rho_1p is None:
                raise InvalidIcc("rho_1p is required for level-one subgrouping")
            ok = (
                1 + t >= self.rho1
                and self.rho1 + t >= self.rho_1p
                and self.rho1 + t >= self.rho_2p
                and self.rho_1p + t >= self.rho2
                and self.rho_2p + t >= self.rho2
                and self.rho2 >= -t
            )
            if not ok:
                raise InvalidIcc("need 1 >= rho1 >= rho_1p, rho_2p >= rho2 >= 0")
            if abs(self.rho1 + self.rho2 - self.rho_1p - self.rho_2p) > t:
                raise InvalidIcc("need rho1 + rho2 == rho_1p + rho_2p")
        else:
            if self.rho_1p is not None:
                raise InvalidIcc("rho_1p is undefined for level-two subgrouping")
            ok = 1 + t >= self.rho1 and self.rho1 + t >= self.rho_2p and self.rho_2p + t >= self.rho2 and self.rho2 >= -t
            if not ok:
                raise InvalidIcc("need 1 >= rho1 >= rho_2p >= rho2 >= 0")

    def to_dict(self) -> dict:
        out = {"sigma_sq": self.sigma_sq, "rho1": self.rho1, "rho_2p": self.rho_2p, "rho2": self.rho2}
        if self.rho_1p is not None:
            out["rho_1p"] = self.rho_1p
        return out


def _nonneg(x: float) -> float:
    # absorb rounding noise allowed by the ordering tolerance
    if x < 0:
        if x < -ICC_TOL:
            raise InvalidIcc(f"ICC profile implies a negative variance component ({x!r})")
        return 0.0
    return x


def icc_to_components(profile: IccProfile, level: SubgroupLevel | int | str) -> VarianceComponents:
    level = SubgroupLevel.parse(level)
    profile.validate(level)
    s2 = profile.sigma_sq
    sigma3 = _nonneg(s2 * profile.rho2)
    sigma_e = _nonneg(s2 * (1.0 - profile.rho1))
    if level is LEVEL_ONE:
        sigma_grp = _nonneg(s2 * profile.rho_2p - sigma3)
        sigma2 = _nonneg(s2 * profile.rho_1p - sigma3)
        return VarianceComponents(sigma3, sigma2, sigma_grp, sigma_e, level)
    sigma2 = _nonneg(s2 * profile.rho_2p - sigma3)
    sigma1 = _nonneg(s2 * profile.rho1 - sigma3 - sigma2)
    return VarianceComponents(sigma3, sigma2, sigma1, sigma_e, level)


def components_to_icc(vc: VarianceComponents) -> IccProfile:
    s2 = vc.total
    if s2 <= 0:
        raise InvalidComponents("total variance is zero; correlations are undefined")
    rho1 = (vc.sigma3_sq + vc.sigma2_sq + vc.sigma_low_sq) / s2
    rho2 = vc.sigma3_sq / s2
    if vc.level is LEVEL_ONE:
        return IccProfile(
            sigma_sq=s2,
            rho1=rho1,
            rho_1p=(vc.sigma3_sq + vc.sigma2_sq) / s2,
            rho_2p=(vc.sigma3_sq + vc.sigma_low_sq) / s2,
            rho2=rho2,
        )
    return IccProfile(sigma_sq=s2, rho1=rho1, rho_2p=(vc.sigma3_sq + vc.sigma2_sq) / s2, rho2=rho2)


# Simulation settings I and II (sigma^2 = 1).
SETTINGS = {
    "I": dict(rho1=0.2, rho_1p=0.15, rho_2p=0.15, rho2=0.1),
    "II": dict(rho1=0.1, rho_1p=0.075, rho_2p=0.075, rho2=0.05),
}


def setting_profile(name: str, level: SubgroupLevel | int | str, sigma_sq: float = 1.0) -> IccProfile:
    level = SubgroupLevel.parse(level)
    params = dict(SETTINGS[name])
    if level is LEVEL_TWO:
        params.pop("rho_1p")
    return IccProfile(sigma_sq=sigma_sq, **params)


def setting_components(name: str, level: SubgroupLevel | int | str) -> VarianceComponents:
    return icc_to_components(setting_profile(name, level), level)
