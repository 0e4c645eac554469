"""stripescan: motion-artifact detection for circular-FOV row-scanned images.

Pipeline: range compression and SNR gating -> FOV detection -> labeled
horizontal slices -> HOG-moment or corrAngle features -> from-scratch
random forest / linear SVM -> grouped cross-validated ROC/AUC. A seeded
synthetic generator stands in for clinical data so everything is testable
end to end.
"""

from .classify import (
    LinearSvm,
    RandomForest,
    RfParams,
    Standardizer,
    SvmParams,
    TrainConfig,
    load_model,
    save_model,
    undersample,
)
from .errors import StripescanError
from .evaluation import (
    FoldAssignment,
    RocCurve,
    aggregate_folds,
    grouped_kfold,
    leave_one_patient_out,
    roc_curve,
)
from .features import (
    CorrAngleConfig,
    CorrAngleFeaturizer,
    FeatureVector,
    HogConfig,
    HogFeaturizer,
    corr_angle,
    hog_descriptor,
    hog_stats,
)
from .imagecore import (
    DatasetManifest,
    FovMask,
    GrayImage,
    ManifestEntry,
    SliceRecord,
    detect_fov,
    extract_slices,
    quantile_compress,
    read_image,
    read_manifest,
    snr_estimate,
    write_image,
    write_manifest,
)
from .matrix import FeatureMatrix, read_feature_csv, write_feature_csv
from .pipeline import PreprocessConfig, SliceConfig, build_feature_matrix, run_cv
from .synth import SynthConfig, generate_clean, generate_dataset, inject_stretch, inject_stripe

__version__ = "0.1.0"

__all__ = [
    "CorrAngleConfig", "CorrAngleFeaturizer", "DatasetManifest", "FeatureMatrix",
    "FeatureVector", "FoldAssignment", "FovMask", "GrayImage", "HogConfig",
    "HogFeaturizer", "LinearSvm", "ManifestEntry", "PreprocessConfig",
    "RandomForest", "RfParams", "RocCurve", "SliceConfig", "SliceRecord",
    "Standardizer", "StripescanError", "SvmParams", "SynthConfig", "TrainConfig",
    "aggregate_folds", "build_feature_matrix", "corr_angle", "detect_fov",
    "extract_slices", "generate_clean", "generate_dataset", "grouped_kfold",
    "hog_descriptor", "hog_stats", "inject_stretch", "inject_stripe",
    "leave_one_patient_out", "load_model", "quantile_compress", "read_feature_csv",
    "read_image", "read_manifest", "roc_curve", "run_cv", "save_model",
    "snr_estimate", "undersample", "write_feature_csv", "write_image",
    "write_manifest",
]
