"""Stable-by-design neural LPV state-space identification.

The transition matrix at every step is produced through a Schur-complement
parameterization, so its spectral radius stays below a chosen bound gamma
for any network weights.
"""

from .baseline import ConstantSsModel
from .model import NnssModel, infer, rollout
from .schurparam import SchurFactors, build_transition, fit_to_target
from .train import TrainConfig, fit, make_windows

__all__ = [
    "ConstantSsModel",
    "NnssModel",
    "SchurFactors",
    "TrainConfig",
    "build_transition",
    "fit",
    "fit_to_target",
    "infer",
    "make_windows",
    "rollout",
]
