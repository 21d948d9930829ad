from .contextual import (
    ContextualModel,
    ModelShape,
    TrainConfig,
    TrainingDivergedError,
    GradientCheck,
    TrainResult,
    forward,
    gradient_check,
    loss_and_grads,
    train_contextual,
)
from .forest import ForestModel, Tree, hash_text_bits, predict_forest, train_forest
from .pipeline import (
    ContextualClassifier,
    ForestClassifier,
    load_classifier,
    make_classifier,
    save_classifier,
)

__all__ = [
    "ContextualClassifier",
    "ContextualModel",
    "ForestClassifier",
    "ForestModel",
    "ModelShape",
    "GradientCheck",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "Tree",
    "forward",
    "gradient_check",
    "hash_text_bits",
    "load_classifier",
    "loss_and_grads",
    "make_classifier",
    "predict_forest",
    "save_classifier",
    "train_contextual",
    "train_forest",
]
