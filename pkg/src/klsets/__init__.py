"""Explicit Gauss-measure bounds for Khintchine-Levy sets of continued fractions."""

__version__ = "0.1.0"

from .constants import ConstantsTable, constants_table  # noqa: E402
from .bounds import BoundReport, KLQuery, kl_measure_lower_bound, min_n_for_estimate, xi  # noqa: E402
from .cf_engine import ContinuedFraction, CFStatistics, expand, statistics  # noqa: E402

__all__ = [
    "__version__",
    "ConstantsTable",
    "constants_table",
    "BoundReport",
    "KLQuery",
    "kl_measure_lower_bound",
    "min_n_for_estimate",
    "xi",
    "ContinuedFraction",
    "CFStatistics",
    "expand",
    "statistics",
]
