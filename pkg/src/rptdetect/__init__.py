"""Periodic-subspace detection of SSVEP responses with Ramanujan dictionaries."""

__version__ = "0.1.0"

from .errors import (EstimationError, InvalidArgumentError, NumericError, ParseError, RPTError,
                     SingularSupportError)
from .ramanujan import (DictionaryMatrix, PeriodicSubmatrix, RamanujanSequence, SupportSet,
                        build_dictionary, build_submatrix, divisors, euler_totient, ramanujan_sum,
                        restrict, support_set)
from .detector import (BinaryDetector, Hypothesis, MaryDetector, ProjectionOperator,
                       SpatialCovariance, binary_decide, binary_detector, binary_statistic,
                       estimate_spatial_covariance, mary_decide, mary_detector, mary_statistics,
                       projection_operator, spatial_covariance)
from .baselines import ReferenceMatrix, cca_decide, cca_rho, psda_decide, reference_matrix

__all__ = [
    "BinaryDetector", "DictionaryMatrix", "EstimationError", "Hypothesis", "InvalidArgumentError",
    "MaryDetector", "NumericError", "ParseError", "PeriodicSubmatrix", "ProjectionOperator",
    "RPTError", "RamanujanSequence", "ReferenceMatrix", "SingularSupportError",
    "SpatialCovariance", "SupportSet", "binary_decide", "binary_detector", "binary_statistic",
    "build_dictionary", "build_submatrix", "cca_decide", "cca_rho", "divisors",
    "estimate_spatial_covariance", "euler_totient", "mary_decide", "mary_detector",
    "mary_statistics", "projection_operator", "psda_decide", "ramanujan_sum", "reference_matrix",
    "restrict", "spatial_covariance", "support_set",
]
