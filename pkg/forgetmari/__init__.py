"""
forgetmari - marginal-information unlearning for small language models.

Import from submodules:
    from forgetmari.infomath import kl_divergence, js_divergence, weighted_js_divergence
    from forgetmari.langmodel import ModelArch, init_checkpoint, SequenceBatch, averaged_marginals
    from forgetmari.mariloss import marginal_information, mari_loss_and_gradient
    from forgetmari.unlearner import UnlearnConfig, finetune, unlearn
    from forgetmari.bounds import DetectionGame, evaluate_bounds, prop1_campaign
    from forgetmari.detector import DetectorConfig, detect, roc_auc
    from forgetmari.experiment import run_experiment, build_report

`forgetmari.cli` needs typer, which the base install carries; nothing here
imports it.
"""

from ._version import __version__
from .bounds import BoundReport, DetectionGame, evaluate_bounds
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, load_experiment_config
from .detector import DetectionReport, DetectorConfig, detect
from .exceptions import MariError
from .experiment import run_experiment
from .langmodel import ModelArch, ModelCheckpoint, SequenceBatch, init_checkpoint
from .mariloss import marginal_information
from .unlearner import UnlearnConfig, finetune, unlearn
from .vocab import Vocabulary

__all__ = [
    "__version__",
    "MariError",
    "ModelArch",
    "ModelCheckpoint",
    "SequenceBatch",
    "Vocabulary",
    "init_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "marginal_information",
    "UnlearnConfig",
    "finetune",
    "unlearn",
    "DetectorConfig",
    "DetectionReport",
    "detect",
    "DetectionGame",
    "BoundReport",
    "evaluate_bounds",
    "ExperimentConfig",
    "load_experiment_config",
    "run_experiment",
]
