"""Model architectures: a linear-head classifier over encoded organization
text, and a pair scorer that rates (organization text, label description)
pairs; plus the text encoders behind them."""
from orgclass.models.encoders import (
    KIND_BASELINE,
    KIND_TRANSFORMER,
    EncoderConfig,
    HashedNgramEncoder,
    TextEncoder,
    TransformerEncoder,
    make_encoder,
)
from orgclass.models.classifier import (
    ARCH_ORGMODEL1,
    ARCH_ORGMODEL2,
    MODE_MULTILABEL,
    MODE_SINGLELABEL,
    ClassifierState,
    ModelConfigError,
    Prediction,
    load_model,
    orgmodel1_scores,
    orgmodel2_strengths,
    predict_dataset,
    predict_example,
    predict_multilabel,
    predict_singlelabel,
    save_model,
)
from orgclass.models.train import TrainConfig, TrainingError, train

__all__ = [
    "KIND_BASELINE",
    "KIND_TRANSFORMER",
    "EncoderConfig",
    "HashedNgramEncoder",
    "TextEncoder",
    "TransformerEncoder",
    "make_encoder",
    "ARCH_ORGMODEL1",
    "ARCH_ORGMODEL2",
    "MODE_MULTILABEL",
    "MODE_SINGLELABEL",
    "ClassifierState",
    "ModelConfigError",
    "Prediction",
    "load_model",
    "orgmodel1_scores",
    "orgmodel2_strengths",
    "predict_dataset",
    "predict_example",
    "predict_multilabel",
    "predict_singlelabel",
    "save_model",
    "TrainConfig",
    "TrainingError",
    "train",
]
