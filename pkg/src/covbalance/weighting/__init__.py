"""Loss-weighting strategies sharing one estimator interface."""

from covbalance.weighting._base import (
    LossObservation,
    LossWeighting,
    WeightVector,
    equal_weights,
    normalize_scores,
)
from covbalance.weighting.cov import CovState, CovVariant, CovWeighting, cov_observe, loss_ratio
from covbalance.weighting.gradnorm import GradNormWeighting, gradnorm_weights
from covbalance.weighting.mgda import (
    MGDAWeighting,
    frank_wolfe_min_norm,
    mgda_weights,
    min_norm_point,
    min_norm_two,
)
from covbalance.weighting.static import EqualWeighting, StaticWeighting, static_weights
from covbalance.weighting.uncertainty import (
    UncertaintyWeighting,
    uncertainty_objective,
    uncertainty_weights,
)

__all__ = [
    "CovState",
    "CovVariant",
    "CovWeighting",
    "EqualWeighting",
    "GradNormWeighting",
    "LossObservation",
    "LossWeighting",
    "MGDAWeighting",
    "StaticWeighting",
    "UncertaintyWeighting",
    "WeightVector",
    "cov_observe",
    "equal_weights",
    "frank_wolfe_min_norm",
    "gradnorm_weights",
    "loss_ratio",
    "mgda_weights",
    "min_norm_point",
    "min_norm_two",
    "normalize_scores",
    "static_weights",
    "uncertainty_objective",
    "uncertainty_weights",
]
