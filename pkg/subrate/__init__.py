from .failures import RateFailure, UsageFailure, InvalidBlockFailure, NumericalFailure, UndefinedMetricFailure, DatasetFailure, CompositeDatasetFailure, RecordPath
from .config import default_config, EstimationConfiguration, GradientDescentSettings
from .block import CoeffBlock, SubBlockView, DatasetRecord, subblocks, assemble
from .features import FeatureVector, extract, extract_batch, extract_array, feature_s, feature_l, feature_z, feature_e
from .models import (
    ModelKind, FeatureMask, SubBlockLinearParams, RhoDomainParams, LogisticParams, FitReport, ModelFile,
    predict_subblock, predict_rho, predict_logistic, fit_linear, fit_logistic, analytic_gradient, save_model, load_model,
)
from .batch import RecordBatch, fit_model, estimate
from .evaluation import (
    MetricsReport, CrossValReport, AblationTable, pearson, mae, mre, metrics, evaluate, in_sample_mse, fold_indexes,
    kfold_cv, cross_qp_eval, select_qp, cross_qp_matrix, ablate,
    scatter_dump, compare,
)
from .dataset import DatasetFile, read_dataset, iter_records, write_dataset
from .synth import SynthConfig, generate, oracle_rate

__all__ = [
    "RateFailure",
    "UsageFailure",
    "InvalidBlockFailure",
    "NumericalFailure",
    "UndefinedMetricFailure",
    "DatasetFailure",
    "CompositeDatasetFailure",
    "RecordPath",
    "default_config",
    "EstimationConfiguration",
    "GradientDescentSettings",
    "CoeffBlock",
    "SubBlockView",
    "DatasetRecord",
    "subblocks",
    "assemble",
    "FeatureVector",
    "extract",
    "extract_batch",
    "extract_array",
    "feature_s",
    "feature_l",
    "feature_z",
    "feature_e",
    "ModelKind",
    "FeatureMask",
    "SubBlockLinearParams",
    "RhoDomainParams",
    "LogisticParams",
    "FitReport",
    "ModelFile",
    "predict_subblock",
    "predict_rho",
    "predict_logistic",
    "fit_linear",
    "fit_logistic",
    "analytic_gradient",
    "save_model",
    "load_model",
    "RecordBatch",
    "fit_model",
    "estimate",
    "MetricsReport",
    "CrossValReport",
    "AblationTable",
    "pearson",
    "mae",
    "mre",
    "metrics",
    "evaluate",
    "in_sample_mse",
    "fold_indexes",
    "kfold_cv",
    "cross_qp_eval",
    "select_qp",
    "cross_qp_matrix",
    "ablate",
    "scatter_dump",
    "compare",
    "DatasetFile",
    "read_dataset",
    "iter_records",
    "write_dataset",
    "SynthConfig",
    "generate",
    "oracle_rate",
]
