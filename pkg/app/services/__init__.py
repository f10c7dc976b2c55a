from .training_service import (
    SourceResult, TrainState, TrainingService, build_manifest, get_training_service, load_model, save_model,
)
from .evaluation_service import EvaluationService, get_evaluation_service
from .experiment_service import ArmResult, ExperimentService, get_experiment_service

__all__ = [
    "SourceResult", "TrainState", "TrainingService", "build_manifest", "get_training_service",
    "load_model", "save_model",
    "EvaluationService", "get_evaluation_service",
    "ArmResult", "ExperimentService", "get_experiment_service",
]
