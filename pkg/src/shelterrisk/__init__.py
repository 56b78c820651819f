"""Forecasting chronic homelessness risk from shelter service records.

The pipeline: raw client attributes + service events (`records`) are encoded
on a 30-day grid into fixed-length example vectors (`schema`, `pipeline`),
a hybrid LSTM + dense network is trained with a weighted-F1 surrogate loss
(`net`), evaluated by nested rolling-origin cross-validation (`evaluation`),
and explained locally and globally with LIME + submodular pick (`explain`).
`synth` generates calibrated synthetic data with a planted risk signal for
end-to-end validation; `cli` wires everything behind one command.
"""

from .config import RunConfig
from .evaluation import (
    CVReport,
    Metrics,
    auc_score,
    compare_models,
    compute_metrics,
    nested_cv,
    train_logreg,
)
from .explain import (
    Explanation,
    GlobalExplanation,
    LimeConfig,
    explain_instance,
    fit_discretizer,
    model_predictor,
    submodular_pick,
)
from .net import (
    ModelConfig,
    ModelParams,
    TrainReport,
    forward,
    init_params,
    load_checkpoint,
    loss_gradient,
    predict,
    save_checkpoint,
    train,
    weighted_f1_loss,
)
from .pipeline import (
    Dataset,
    Example,
    StandardScaler,
    apply_scaler,
    build_dataset,
    count_stays,
    fit_scaler,
    is_chronic,
    label_example,
    load_dataset,
    partition,
    save_dataset,
)
from .records import ClientAttributes, DataFormatError, RecordSet, ServiceEvent, load_records, save_records
from .schema import ClientState, FeatureSchema, default_schema, encode
from .synth import SynthConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "ClientAttributes",
    "ClientState",
    "CVReport",
    "Dataset",
    "DataFormatError",
    "Example",
    "Explanation",
    "FeatureSchema",
    "GlobalExplanation",
    "LimeConfig",
    "Metrics",
    "ModelConfig",
    "ModelParams",
    "RecordSet",
    "RunConfig",
    "ServiceEvent",
    "StandardScaler",
    "SynthConfig",
    "TrainReport",
    "apply_scaler",
    "auc_score",
    "build_dataset",
    "compare_models",
    "compute_metrics",
    "count_stays",
    "default_schema",
    "encode",
    "explain_instance",
    "fit_discretizer",
    "fit_scaler",
    "forward",
    "generate_synthetic",
    "init_params",
    "is_chronic",
    "label_example",
    "load_checkpoint",
    "load_dataset",
    "load_records",
    "loss_gradient",
    "model_predictor",
    "nested_cv",
    "partition",
    "predict",
    "save_checkpoint",
    "save_dataset",
    "save_records",
    "submodular_pick",
    "train",
    "train_logreg",
    "weighted_f1_loss",
    "__version__",
]
