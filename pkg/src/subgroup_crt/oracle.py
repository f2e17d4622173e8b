"""Dense-matrix reference implementation used to certify the closed forms.

Everything here works on the full ``m x m`` covariance matrix and is meant
for small designs only.  Nothing in this module calls the closed-form
estimators; the tests compare the two paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .design import Design, FixedEffects, VarianceComponents
from .errors import NoConvergence, SingularComponents, SingularCovariance, SingularSystem, TooLarge
from .simulate import TrialData

DEFAULT_CAP = 5000


@dataclass(frozen=True)
class DenseCovariance:
    design: Design
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class LambdaAggregates:
    """Eigenvalues of the covariance matrix, innermost first.

    ``lambda1 = s_e + d3 s_low``, ``lambda2 = lambda1 + d2 d3 s_2`` and
    ``lambda3 = lambda2 + d1 d2 d3 s_3`` where ``(d1, d2, d3)`` are the inner
    axes of the data layout.
    """

    lambda0: float
    lambda1: float
    lambda2: float
    lambda3: float

    @classmethod
    def from_components(cls, design: Design, vc: VarianceComponents | tuple) -> "LambdaAggregates":
        s3, s2, s_low, s_e = vc.as_tuple() if isinstance(vc, VarianceComponents) else vc
        _, d1, d2, d3 = design.shape
        l0 = s_e
        l1 = l0 + d3 * s_low
        l2 = l1 + d2 * d3 * s2
        l3 = l2 + d1 * d2 * d3 * s3
        return cls(l0, l1, l2, l3)

    def to_components(self, design: Design) -> tuple[float, float, float, float]:
        """Inverse map, returning ``(s3, s2, s_low, s_e)`` (possibly negative)."""
        _, d1, d2, d3 = design.shape
        return (
            (self.lambda3 - self.lambda2) / (d1 * d2 * d3),
            (self.lambda2 - self.lambda1) / (d2 * d3),
            (self.lambda1 - self.lambda0) / d3,
            self.lambda0,
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lambda0, self.lambda1, self.lambda2, self.lambda3)

    @property
    def ordered(self) -> bool:
        return self.lambda0 <= self.lambda1 <= self.lambda2 <= self.lambda3


def multiplicities(design: Design) -> tuple[int, int, int, int]:
    """Dimension of each eigenspace of the covariance matrix."""
    n3x2, d1, d2, d3 = design.shape
    return (n3x2 * d1 * d2 * (d3 - 1), n3x2 * d1 * (d2 - 1), n3x2 * (d1 - 1), n3x2)


def _check_cap(design: Design, cap: int) -> None:
    if design.n_obs > cap:
        raise TooLarge(f"{design.n_obs} observations exceed the dense oracle cap of {cap}")


def _labels(design: Design) -> np.ndarray:
    """``(m, 3)`` integer labels: level-3 unit, then the two nested groupings."""
    i, a, b, _ = np.indices(design.shape).reshape(4, -1)
    return np.stack([i, a, b], axis=1)


def sharing_indicators(design: Design, cap: int = DEFAULT_CAP) -> list[np.ndarray]:
    """0/1 matrices marking pairs that share each random intercept.

    Order: level-three intercept, middle intercept, innermost intercept,
    error (the identity).
    """
    _check_cap(design, cap)
    lab = _labels(design)
    same_i = lab[:, None, 0] == lab[None, :, 0]
    same_a = same_i & (lab[:, None, 1] == lab[None, :, 1])
    same_b = same_a & (lab[:, None, 2] == lab[None, :, 2])
    eye = np.eye(design.n_obs, dtype=bool)
    return [m.astype(np.float64) for m in (same_i, same_a, same_b, eye)]


def build_covariance(design: Design, vc: VarianceComponents, cap: int = DEFAULT_CAP) -> DenseCovariance:
    """``Cov(Y)`` entry by entry from the sharing class of each pair."""
    vc.check_level(design)
    mats = sharing_indicators(design, cap)
    v = sum(s * z for s, z in zip(vc.as_tuple(), mats))
    return DenseCovariance(design, v)


def _averaging(design: Design) -> list[np.ndarray]:
    # Block-averaging operators over the innermost 1, 2 and 3 axes.
    n3x2, d1, d2, d3 = design.shape
    blocks = [(n3x2 * d1 * d2, d3), (n3x2 * d1, d2 * d3), (n3x2, d1 * d2 * d3)]
    return [np.kron(np.eye(reps), np.full((size, size), 1.0 / size)) for reps, size in blocks]


def inverse_covariance_closed_form(
    design: Design, vc: VarianceComponents, cap: int = DEFAULT_CAP
) -> DenseCovariance:
    """Inverse covariance as a weighted sum of Kronecker projections."""
    vc.check_level(design)
    _check_cap(design, cap)
    lam = LambdaAggregates.from_components(design, vc).as_tuple()
    if min(lam) <= 0:
        raise SingularComponents("a covariance eigenvalue is zero")
    m1, m2, m3 = _averaging(design)
    eye = np.eye(design.n_obs)
    proj = (eye - m1, m1 - m2, m2 - m3, m3)
    return DenseCovariance(design, sum(p / l for p, l in zip(proj, lam)))


def design_matrix(design: Design) -> np.ndarray:
    """Columns: intercept, Subgroup 1 indicator, treatment, their product."""
    n3 = design.n3_per_arm
    idx = np.indices(design.shape).reshape(4, -1)
    treated = (idx[0] < n3).astype(np.float64)
    sub1 = (idx[design.subgroup_axis] == 0).astype(np.float64)
    return np.column_stack([np.ones_like(treated), sub1, treated, treated * sub1])


def _chol(v: np.ndarray, exc: type) -> tuple:
    try:
        return linalg.cho_factor(v, lower=True, check_finite=True)
    except linalg.LinAlgError as err:
        raise exc(f"matrix is not positive definite: {err}") from None


def _gls(x: np.ndarray, y: np.ndarray, factor: tuple) -> np.ndarray:
    wx = linalg.cho_solve(factor, x)
    xtwx = x.T @ wx
    xtwy = wx.T @ y
    try:
        f = linalg.cho_factor(xtwx, lower=True)
    except linalg.LinAlgError:
        raise SingularSystem("normal equations are singular") from None
    return linalg.cho_solve(f, xtwy)


def gls_fixed_effects(data: TrialData, vc: VarianceComponents, cap: int = DEFAULT_CAP) -> FixedEffects:
    """Solve ``X' V^-1 X beta = X' V^-1 Y`` with the dense covariance."""
    design = data.design
    v = build_covariance(design, vc, cap).entries
    factor = _chol(v, SingularSystem)
    beta = _gls(design_matrix(design), data.y, factor)
    return FixedEffects(*(float(b) for b in beta))


def _loglik(y: np.ndarray, mean: np.ndarray, factor: tuple) -> float:
    r = y - mean
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    quad = float(r @ linalg.cho_solve(factor, r))
    return -0.5 * (y.size * math.log(2.0 * math.pi) + logdet + quad)


def log_likelihood(data: TrialData, fx: FixedEffects, vc: VarianceComponents, cap: int = DEFAULT_CAP) -> float:
    """Exact Gaussian log density of the outcomes."""
    design = data.design
    v = build_covariance(design, vc, cap).entries
    factor = _chol(v, SingularCovariance)
    beta = np.array([fx.beta0, fx.tau, fx.xi, fx.delta])
    return _loglik(data.y, design_matrix(design) @ beta, factor)


@dataclass(frozen=True)
class NumericML:
    """Result of :func:`numeric_ml`.

    ``raw`` holds ``(s3, s2, s_low, s_e)`` at the optimum; in unconstrained
    mode entries may be negative, and ``vc`` clips them at zero.
    """

    fx: FixedEffects
    raw: tuple[float, float, float, float]
    loglik: float
    iterations: int
    constrained: bool

    @property
    def vc_tuple(self) -> tuple[float, float, float, float]:
        return tuple(max(v, 0.0) for v in self.raw)


def _profile(x, y, mats, theta):
    """Log-likelihood, gradient, observed and expected information at ``theta``."""
    v = sum(t * z for t, z in zip(theta, mats))
    try:
        factor = linalg.cho_factor(v, lower=True)
    except linalg.LinAlgError:
        return None
    beta = _gls(x, y, factor)
    ll = _loglik(y, x @ beta, factor)
    w = linalg.cho_solve(factor, np.eye(y.size))
    p = w @ (y - x @ beta)
    wz = [w @ z for z in mats]
    zp = [z @ p for z in mats]
    k = len(mats)
    grad = np.array([-0.5 * np.trace(wz[a]) + 0.5 * p @ zp[a] for a in range(k)])
    fisher = np.empty((k, k))
    observed = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            f = 0.5 * np.sum(wz[a] * wz[b].T)
            fisher[a, b] = fisher[b, a] = f
            o = zp[a] @ w @ zp[b] - f
            observed[a, b] = observed[b, a] = o
    return ll, grad, fisher, observed, beta


def numeric_ml(
    data: TrialData,
    constrained: bool = True,
    start: tuple[float, float, float, float] | None = None,
    tol: float = 1e-9,
    max_iter: int = 500,
    cap: int = DEFAULT_CAP,
) -> NumericML:
    """Maximise the exact log-likelihood numerically.

    Fixed effects are profiled out by GLS at every step and the variance
    components are updated by Newton steps on the dense likelihood, falling
    back to Fisher scoring where the observed information is not positive
    definite, with step halving.  ``constrained=True`` keeps every component
    nonnegative (projected steps with an active set); otherwise components
    may go negative as long as the covariance stays positive definite.
    Iteration stops once the log-likelihood gain is below ``tol`` and the
    step is negligible relative to the parameters.
    """
    design = data.design
    _check_cap(design, cap)
    mats = sharing_indicators(design, cap)
    x = design_matrix(design)
    y = data.y
    if start is None:
        total = float(np.var(y - x @ np.linalg.lstsq(x, y, rcond=None)[0]))
        total = total if total > 0 else 1.0
        start = (0.1 * total, 0.1 * total, 0.1 * total, 0.7 * total)
    theta = np.array(start, dtype=np.float64)
    state = _profile(x, y, mats, theta)
    if state is None:
        raise SingularCovariance("starting covariance is not positive definite")
    for it in range(1, max_iter + 1):
        ll, grad, fisher, observed, _ = state
        free = np.ones(4, dtype=bool)
        if constrained:
            free = ~((theta <= 0.0) & (grad <= 0.0))
        step = np.zeros(4)
        if free.any():
            g = grad[free]
            info = observed[np.ix_(free, free)]
            try:
                linalg.cholesky(info)
            except linalg.LinAlgError:
                info = fisher[np.ix_(free, free)]
            step[free] = linalg.solve(info, g, assume_a="sym")
        t = 1.0
        accepted = None
        for _ in range(60):
            cand = theta + t * step
            if constrained:
                cand = np.maximum(cand, 0.0)
            new = _profile(x, y, mats, cand)
            if new is not None and new[0] >= ll - 1e-12 * abs(ll):
                accepted = (cand, new)
                break
            t *= 0.5
        if accepted is None:
            raise NoConvergence("line search failed to improve the log-likelihood")
        moved = np.max(np.abs(accepted[0] - theta))
        gain = accepted[1][0] - ll
        theta, state = accepted
        if gain < tol and moved <= 1e-10 * (1.0 + np.max(np.abs(theta))):
            beta = state[4]
            return NumericML(
                fx=FixedEffects(*(float(b) for b in beta)),
                raw=tuple(float(v) for v in theta),
                loglik=float(state[0]),
                iterations=it,
                constrained=constrained,
            )
    raise NoConvergence(f"no convergence after {max_iter} iterations")


def ordered_lambda_mle(lambdas: tuple[float, ...], weights: tuple[int, ...]) -> tuple[float, ...]:
    """Pool-adjacent-violators fit of nondecreasing eigenvalues.

    Given unrestricted eigenvalue estimates and their eigenspace dimensions,
    returns the maximiser of the likelihood under ``l0 <= l1 <= l2 <= l3``,
    which is the MLE under nonnegative variance components.
    """
    blocks: list[list[float]] = []  # [weighted sum, weight, count]
    for lam, w in zip(lambdas, weights):
        blocks.append([lam * w, float(w), 1])
        while len(blocks) > 1 and blocks[-2][0] / blocks[-2][1] > blocks[-1][0] / blocks[-1][1]:
            s, w2, c = blocks.pop()
            blocks[-1][0] += s
            blocks[-1][1] += w2
            blocks[-1][2] += c
    out: list[float] = []
    for s, w, c in blocks:
        out.extend([s / w] * c)
    return tuple(out)
