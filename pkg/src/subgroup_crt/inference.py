"""Standard normal primitives and the Wald test of no differential effect."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateVariance, DomainError
from .estimate import DeltaEstimate

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def normal_cdf(x: float) -> float:
    """Standard normal CDF via ``erfc`` (accurate in both tails)."""
    if x < 0:
        return 0.5 * math.erfc(-x / _SQRT2)
    return 1.0 - 0.5 * math.erfc(x / _SQRT2)


def normal_sf(x: float) -> float:
    """Upper tail ``1 - Phi(x)`` without cancellation."""
    return 0.5 * math.erfc(x / _SQRT2)


def normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


# Algorithm AS 241 (PPND16), relative accuracy about 1e-16.
_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427, 13731.693765509461125,
      45921.953931549871457, 67265.770927008700853, 33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
      21213.794301586595867, 39307.89580009271061, 28729.085735721942674, 5226.495278852545925)
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055, 3.64784832476320460504,
      1.27045825245236838258, 0.24178072517745061177, 0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494, 0.68976733498510000455,
      0.14810397642748007459, 0.0151986665636164571966, 5.475938084995344946e-4, 1.05075007164441684324e-9)
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358, 0.29656057182850489123,
      0.026532189526576123093, 0.0012426609473880784386, 2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531, 0.0148753612908506148525,
      7.868691311456132591e-4, 1.8463183175100546818e-5, 1.4215117583164458887e-7, 2.04426310338993978564e-15)


def _poly(coef, x: float) -> float:
    acc = 0.0
    for c in reversed(coef):
        acc = acc * x + c
    return acc


def _ppnd16(p: float) -> float:
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        val = _poly(_E, r) / _poly(_F, r)
    return -val if q < 0 else val


def normal_quantile(p: float) -> float:
    """Inverse of :func:`normal_cdf`: AS 241 followed by one Newton step."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"quantile needs 0 < p < 1, got {p!r}")
    x = _ppnd16(p)
    # Newton step on the tail nearest to zero keeps the residual relative.
    if p < 0.5:
        resid = normal_cdf(x) - p
    else:
        resid = (1.0 - p) - normal_sf(x)
    dens = normal_pdf(x)
    if dens > 0:
        x -= resid / dens
    return x


def critical_value(alpha: float) -> float:
    """Two-sided critical value ``z_{1 - alpha/2}``."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    return normal_quantile(1.0 - alpha / 2.0)


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    t0: float
    p_value: float
    alpha: float
    reject: bool
    critical: float


def test_delta(est: DeltaEstimate, alpha: float = 0.05) -> TestResult:
    """Two-sided test of ``delta = 0``; ``|t0| == critical`` does not reject."""
    critical = critical_value(alpha)
    if not est.var_hat > 0:
        raise DegenerateVariance("estimated Var(delta-hat) is zero; the test statistic is undefined")
    t0 = est.delta_hat / math.sqrt(est.var_hat)
    p = min(1.0, 2.0 * normal_sf(abs(t0)))
    return TestResult(t0=t0, p_value=p, alpha=alpha, reject=bool(abs(t0) > critical), critical=critical)


test_delta.__test__ = False
