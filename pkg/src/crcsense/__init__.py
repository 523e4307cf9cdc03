"""Sub-Nyquist multiband spectrum sensing with risk-controlled thresholds."""

from .calibration import (
    CalibrationSet,
    RiskTarget,
    ThresholdVector,
    compute_thresholds,
    crc_threshold,
    decide,
    fnr_of_threshold,
    nonparametric_thresholds,
    occupied_features,
    parametric_thresholds,
)
from .config import RunConfig, parse_config, preset_config
from .harness import (
    SweepSpec,
    TrialResult,
    fnr,
    run_sweep,
    run_trial,
    summarize,
    tnr,
    write_summary_csv,
    write_trials_csv,
)
from .lv import LvArch, LvModel, TrainConfig, forward, load_model, lv_input, save_model, train
from .mcs import CosetPattern, SampleMatrix, choose_cosets, measurement_matrix, sample
from .psd import FeatureVector, SpectralSliceEstimate, coset_spectra, psd_features, somp
from .signal_sim import NyquistSignal, SignalConfig, add_noise, sample_occupancy, synthesize

__version__ = "0.1.0"

__all__ = [
    "CalibrationSet", "CosetPattern", "FeatureVector", "LvArch", "LvModel",
    "NyquistSignal", "RiskTarget", "RunConfig", "SampleMatrix", "SignalConfig",
    "SpectralSliceEstimate", "SweepSpec", "ThresholdVector", "TrainConfig",
    "TrialResult", "add_noise", "choose_cosets", "compute_thresholds",
    "coset_spectra", "crc_threshold", "decide", "fnr", "fnr_of_threshold",
    "forward", "load_model", "lv_input", "measurement_matrix",
    "nonparametric_thresholds", "occupied_features", "parametric_thresholds",
    "parse_config", "preset_config", "psd_features", "run_sweep", "run_trial",
    "sample", "sample_occupancy", "save_model", "somp", "summarize",
    "synthesize", "tnr", "train", "write_summary_csv", "write_trials_csv",
]
