"""End-to-end analysis of one dataset: estimates, test and a JSON-ready report."""

from __future__ import annotations

from dataclasses import dataclass, field

from .design import Design, FixedEffects, VarianceComponents
from .estimate import ComponentEstimates, DeltaEstimate, fit
from .inference import TestResult, test_delta
from .simulate import TrialData

REPORT_SCHEMA = "subgroup-crt/analysis-report/v1"
_COMPONENT_KEYS = ("sigma3_sq", "sigma2_sq", "sigma_low_sq", "sigma_e_sq")


@dataclass(frozen=True)
class AnalysisReport:
    design: Design
    estimate: DeltaEstimate
    components: ComponentEstimates
    test: TestResult
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def fx_hat(self) -> FixedEffects:
        return self.estimate.fx_hat

    @property
    def vc_hat(self) -> VarianceComponents:
        return self.components.vc_hat

    def to_dict(self) -> dict:
        vc = self.vc_hat.to_dict()
        names = list(vc)
        return {
            "schema": REPORT_SCHEMA,
            "design": self.design.to_dict(),
            "delta_hat": self.estimate.delta_hat,
            "se": self.estimate.se,
            "var_hat": self.estimate.var_hat,
            "t0": self.test.t0,
            "p_value": self.test.p_value,
            "reject": self.test.reject,
            "alpha": self.test.alpha,
            "critical": self.test.critical,
            "delta1_hat": self.estimate.delta1_hat,
            "delta2_hat": self.estimate.delta2_hat,
            "fixed_effects": self.fx_hat.to_dict(),
            "variance_components": vc,
            "raw_components": dict(zip(names, self.components.raw)),
            "truncated": dict(zip(names, self.components.truncated)),
            "warnings": list(self.warnings),
        }


def analyze(
    data: TrialData,
    alpha: float = 0.05,
    printed_ss0: bool = False,
    printed_sigma2: bool = False,
) -> AnalysisReport:
    """Estimate all parameters and test ``delta = 0``.

    Raises :class:`~subgroup_crt.errors.DegenerateVariance` when the
    plug-in variance of delta-hat is zero.
    """
    comp, est = fit(data, printed_ss0=printed_ss0, printed_sigma2=printed_sigma2)
    result = test_delta(est, alpha)
    warnings = []
    for name, flag in zip(_COMPONENT_KEYS, comp.truncated):
        if flag:
            warnings.append(f"{name} estimate was negative and has been set to 0")
    if printed_ss0:
        warnings.append("printed_ss0: error variance uses the grand-mean sum of squares")
    if printed_sigma2:
        warnings.append("printed_sigma2: level-two variance uses the 1/n divisor")
    return AnalysisReport(data.design, est, comp, result, tuple(warnings))
