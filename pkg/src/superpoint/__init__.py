"""Sliding-window super point detection and cardinality estimation."""

from .estimators import (
    DEFAULT_RHO,
    SATURATED,
    DetectionParams,
    SlidingLinearEstimator,
    SlidingRoughEstimator,
    compute_tau,
    is_saturated,
    sle_estimate,
)
from .recorders import DistanceRecorder, HashFamily, HashSuite, lsb
from .sea import CandidateList, SEArray, WindowReport, corrected_le_estimate

__all__ = [
    "DEFAULT_RHO",
    "SATURATED",
    "CandidateList",
    "DetectionParams",
    "DistanceRecorder",
    "HashFamily",
    "HashSuite",
    "SEArray",
    "SlidingLinearEstimator",
    "SlidingRoughEstimator",
    "WindowReport",
    "compute_tau",
    "corrected_le_estimate",
    "is_saturated",
    "lsb",
    "sle_estimate",
]
