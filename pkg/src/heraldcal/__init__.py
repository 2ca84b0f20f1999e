"""Heralded-pair absolute detector calibration: analytics, simulator,
coincidence counting, and estimators."""

from .coincidence import (
    CoincConfig,
    CoincCounts,
    accidental_scan,
    count_coincidences,
    delay_histogram,
    triple_counts,
)
from .errors import ConfigError, NumericalError
from .estimation import (
    AccidentalWindowModel,
    CalibrationFit,
    CalibrationModel,
    SweepPoint,
    UncertaintyBudget,
    accidental_line_fit,
    combine_budget,
    conventional_efficiency,
    fit_sweep,
    infer_source_transmission,
    klyshko_bias_curve,
    klyshko_efficiency,
    propagate_sigma_eta,
)
from .fock import (
    DiagonalFockDist,
    EffectiveEfficiency,
    SqueezeParam,
    conditional_click_prob,
    conditional_prob_deta2,
    fock_g2,
    heralded_fidelity_from_g2,
    heralded_g2_analytic,
    heralded_pmf,
    marginal_click_prob,
    squeeze_to_zeta,
    thermal_pmf,
)
from .streams import (
    DetectorChannel,
    SimSeed,
    SourceParams,
    TimeTagStream,
    simulate_hbt_streams,
    simulate_pair_streams,
)

__version__ = "0.1.0"

__all__ = [
    "AccidentalWindowModel",
    "CalibrationFit",
    "CalibrationModel",
    "CoincConfig",
    "CoincCounts",
    "ConfigError",
    "DetectorChannel",
    "DiagonalFockDist",
    "EffectiveEfficiency",
    "NumericalError",
    "SimSeed",
    "SourceParams",
    "SqueezeParam",
    "SweepPoint",
    "TimeTagStream",
    "UncertaintyBudget",
    "accidental_line_fit",
    "accidental_scan",
    "combine_budget",
    "conditional_click_prob",
    "conditional_prob_deta2",
    "conventional_efficiency",
    "count_coincidences",
    "delay_histogram",
    "fit_sweep",
    "fock_g2",
    "heralded_fidelity_from_g2",
    "heralded_g2_analytic",
    "heralded_pmf",
    "infer_source_transmission",
    "klyshko_bias_curve",
    "klyshko_efficiency",
    "marginal_click_prob",
    "propagate_sigma_eta",
    "simulate_hbt_streams",
    "simulate_pair_streams",
    "squeeze_to_zeta",
    "thermal_pmf",
    "triple_counts",
]
