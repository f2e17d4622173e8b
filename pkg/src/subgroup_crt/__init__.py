"""Differential subgroup effects in balanced three-level cluster-randomized trials."""

__version__ = "0.1.0"

from .analysis import AnalysisReport, analyze
from .design import (
    LEVEL_ONE,
    LEVEL_TWO,
    Design,
    FixedEffects,
    IccProfile,
    SubgroupLevel,
    VarianceComponents,
    components_to_icc,
    icc_to_components,
    setting_components,
)
from .estimate import ComponentEstimates, DeltaEstimate, SumsOfSquares, estimate_delta, fit, sums_of_squares, variance_components_mle
from .inference import TestResult, critical_value, normal_cdf, normal_quantile, test_delta
from .power import (
    PowerSpec,
    SampleSize,
    SubgroupPowerSpec,
    power_curve,
    power_lower_bound,
    required_N1_level2,
    required_n_level1,
    required_subgroup_n_level1,
    required_subgroup_n_level2,
    var_delta_formula,
)
from .simulate import TrialData, simulate, substream_seed

__all__ = [name for name in dir() if not name.startswith("_")]
