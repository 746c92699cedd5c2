"""Frozen reference values for the trueness/precision metric suite.

Each row pairs relative-error summary statistics (mean, sd, n) with the
externally tabulated metric values they must reproduce: the t-based interval
half-width, the chi-square upper confidence limit sigma_ucl, and its
sqrt(1/2)-scaled cv_ucl.  Values are quoted to the three decimals of the
source tabulation and asserted to +-0.005.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class MetricRow:
    label: str
    mean: float
    sd: float | None  # None: sd is reconstructed from sigma_ucl (bijective at fixed n)
    n: int
    half_width: float
    sigma_ucl: float
    cv_ucl: float
    cv_ucl_consistent: bool = True  # False: tabulated cv cell contradicts sigma*sqrt(1/2)


METRIC_ROWS = (
    MetricRow("DN7C/OLS", 21.636, 61.989, 7320, 1.192, 62.655, 44.304),
    MetricRow("PMSA/OLS", 4.178, 20.012, 7633, 0.377, 20.222, 14.299),
    MetricRow("HPMA/OLS", 2.411, 16.438, 7453, 0.313, 16.613, 11.747),
    MetricRow("OPCN/OLS", 14.771, 46.530, 7720, 0.871, 47.017, 33.246),
    MetricRow("DUST/OLS", 10.192, 39.652, 7683, 0.744, 40.068, 28.332),
    MetricRow("DN7C/MLR", 11.368, 38.675, 7547, 0.732, 39.084, 27.637),
    MetricRow("PMSA/MLR", 3.696, 17.278, 7497, 0.328, 17.461, 12.347),
    MetricRow("HPMA/MLR", 4.854, 14.449, 7246, 0.279, 14.605, 10.327),
    # The tabulated cv cell of this row (27.8462) contradicts its own
    # sigma_ucl * sqrt(1/2) = 27.462; the consistent value is asserted.
    MetricRow("OPCN/MLR", 9.701, 38.426, 7395, 0.735, 38.837, 27.462,
              cv_ucl_consistent=False),
    MetricRow("DUST/MLR", 6.147, 23.995, 7562, 0.454, 24.248, 17.146),
    MetricRow("FLEET/MLR", 3.882, None, 7382, 0.407, 21.501, 15.204),
    MetricRow("FLEET/OLS", 3.186, None, 7610, 0.491, 26.308, 18.602),
)

TOLERANCE = 0.005
