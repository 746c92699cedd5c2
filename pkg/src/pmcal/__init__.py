"""pmcal: calibration and field evaluation of collocated low-cost PM sensors.

The toolkit preprocesses regular-interval sensor series, removes
condensation-corrupted measurements with a streaming PM-ratio gate, fits
linear calibration models against a collocated reference, computes a
regulatory-style data-quality metric suite, and generates seeded synthetic
datasets (including a light-scattering forward model) for validation.
"""

from .calibrate import (
    DeviceCalibration,
    FittedModel,
    ModelKind,
    ModelSpec,
    fit,
    fleet_calibrate,
    model_from_text,
    model_to_text,
    predict,
    prediction_bounds,
)
from .cleanse import (
    AuditRecord,
    CleanseConfig,
    CleanseDecision,
    CleanseResult,
    RatioWindowState,
    Verdict,
    cleanse_series,
    cleanse_step,
    init_window,
)
from .errors import (
    ConfigurationError,
    SingularDesignError,
    StageError,
    ToolkitError,
    UnsupportedModelError,
)
from .evaluate import (
    BiasResult,
    ComparabilityResult,
    CvRmsResult,
    EvaluationReport,
    FleetInputs,
    LodInputs,
    LodResult,
    PrecisionResult,
    RelErrorSet,
    bias_pep,
    comparability,
    cv_rms,
    evaluate,
    lod,
    relative_errors,
    sigma_ucl,
)
from .optics import (
    AerosolAssumptions,
    BinCounts,
    OpticalGeometry,
    mie_intensity,
    opc_mass_concentration,
    particle_mass,
    pnm_mass_from_signal,
    pnm_sensitivity,
)
from .statcore import SampleStats, chi2_quantile, pearson_r, sample_stats, t_quantile
from .synthgen import (
    DiurnalProfile,
    FogEvent,
    MeanRevertingLevel,
    SensorProfile,
    TruthScenario,
    generate_truth,
    simulate_sensor,
)
from .timeseries import (
    CollocatedPairs,
    IntervalMask,
    Sample,
    Series,
    align_collocated,
    apply_mask,
    average_interval,
    completeness,
    repair_last_valid,
    unitwise_average,
)

__version__ = "0.1.0"
