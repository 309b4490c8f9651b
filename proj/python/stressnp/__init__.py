from ._core import (
    ConfigError,
    Error,
    LoadError,
    MetricError,
    ParameterError,
    TrainingError,
    ValidationError,
    average_precision,
    csi,
    decompose_gsr,
    detect_r_peaks,
    extract,
    feature_names,
    hrv_time,
    log_loss,
    lowpass,
    roc_auc,
    rqa,
    run,
    sample_entropy,
    synth,
)

__all__ = [name for name in dir() if not name.startswith("_")]
