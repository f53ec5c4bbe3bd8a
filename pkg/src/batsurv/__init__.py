"""Survival analysis for battery remaining-useful-life prediction.

Voltage trajectories become fixed-length features through truncated path
signatures; capacity fade becomes censored time-to-failure labels; five
survival models (linear Cox, neural Cox, CoxTime, DeepHit, MTLR) predict
failure-free probability curves, evaluated with censoring-aware metrics.
"""

from .ingest import (
    CapacityTrace,
    RawDatasetConfig,
    VoltagePath,
    clean_nasa,
    label_failure,
    label_nasa_cycle,
    load_cycle_series,
)
from .metrics import MetricsReport, c_index, evaluate_model, ibs, t_auc
from .models import (
    CoxRegression,
    CoxTime,
    DeepHit,
    Mtlr,
    NeuralCoxPH,
    SurvivalCurve,
    integrated_risk,
    load_model,
    save_model,
)
from .signature import SignatureFeaturizer, augment_time, signature, signature_dim
from .survdata import (
    KmCurve,
    SurvivalDataset,
    SurvivalRecord,
    TimeGrid,
    generate_synthetic,
    ipcw_weight,
    km_estimate,
    make_grid,
    risk_set,
    split,
)
from .validation import make_survival_y

__version__ = "0.1.0"

__all__ = [
    "CapacityTrace",
    "CoxRegression",
    "CoxTime",
    "DeepHit",
    "KmCurve",
    "MetricsReport",
    "Mtlr",
    "NeuralCoxPH",
    "RawDatasetConfig",
    "SignatureFeaturizer",
    "SurvivalCurve",
    "SurvivalDataset",
    "SurvivalRecord",
    "TimeGrid",
    "VoltagePath",
    "augment_time",
    "c_index",
    "clean_nasa",
    "evaluate_model",
    "generate_synthetic",
    "ibs",
    "integrated_risk",
    "ipcw_weight",
    "km_estimate",
    "label_failure",
    "label_nasa_cycle",
    "load_cycle_series",
    "load_model",
    "make_grid",
    "make_survival_y",
    "risk_set",
    "save_model",
    "signature",
    "signature_dim",
    "split",
    "t_auc",
]
