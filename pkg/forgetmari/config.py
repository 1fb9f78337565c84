"""
Experiment configuration.

An experiment is described by a JSON document validated against
``schemas/experiment.yaml``. Values are resolved with the priority

    CLI override > MARI_* environment variable > config file > default
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from jsonschema import Draft7Validator

from .const import (
    DEFAULT_CLIP_NORM,
    DEFAULT_CONTEXT_LEN,
    DEFAULT_EMBED_DIM,
    DEFAULT_HIDDEN_DIM,
    DEFAULT_K_FRACTION,
    DEFAULT_SEQ_LEN,
    EXPERIMENT_SCHEMA_PATH,
    SWEEP_METHODS,
)
from .corpus import SplitSpec
from .detector import DetectorConfig
from .exceptions import InvalidConfigError
from .langmodel import ModelArch
from .unlearner import UnlearnConfig

_LOGGER = logging.getLogger(__name__)

DEFAULTS = {
    "seed": 0,
    "output_dir": "runs/forgetmari",
    "corpus": {
        "train": None,
        "validation": None,
        "holdout": None,
        "synthetic": {"n_sentences": 200, "overlap": 0.0, "n_holdout": 0, "n_validation": 0},
        "split": {"mode": "alternating", "unlearn_fraction": 0.5},
    },
    "vocab": {"level": "char"},
    "model": {
        "context_len": DEFAULT_CONTEXT_LEN,
        "embed_dim": DEFAULT_EMBED_DIM,
        "hidden_dim": DEFAULT_HIDDEN_DIM,
        "seq_len": DEFAULT_SEQ_LEN,
    },
    "finetune": {"epochs": 40, "lr": 0.5, "batch_size": 16, "clip_norm": DEFAULT_CLIP_NORM},
    "unlearn": {
        "method": "mari",
        "lambda": 0.5,
        "mode": "pooled",
        "epochs": 30,
        "lr": 0.01,
        "optimizer": "adam",
        "batch_size": 16,
        "early_stop_val_drop": 0.03,
        "stop_policy": "val_drop",
        "alpha_policy": "batch",
        "clip_norm": DEFAULT_CLIP_NORM,
        "detector_stop_auc": 0.5,
    },
    "compare_methods": [],
    "sweep": {"lambda_grid": [], "methods": list(SWEEP_METHODS)},
    "detector": {"detector": "min_k", "k_fraction": DEFAULT_K_FRACTION},
    "bounds": {"epsilon": 0.1, "n_paths": 8},
}

ENV_VAR_MAPPINGS = {
    "MARI_SEED": "seed",
    "MARI_OUTPUT_DIR": "output_dir",
    "MARI_METHOD": ("unlearn", "method"),
    "MARI_LAMBDA": ("unlearn", "lambda"),
    "MARI_MODE": ("unlearn", "mode"),
    "MARI_EPOCHS": ("unlearn", "epochs"),
    "MARI_LR": ("unlearn", "lr"),
    "MARI_K_FRACTION": ("detector", "k_fraction"),
}


@dataclass(frozen=True)
class SyntheticSettings:
    n_sentences: int = 200
    overlap: float = 0.0
    n_holdout: int = 0
    n_validation: int = 0


@dataclass(frozen=True)
class CorpusSettings:
    train: Optional[str] = None
    validation: Optional[str] = None
    holdout: Optional[str] = None
    synthetic: SyntheticSettings = SyntheticSettings()
    split_mode: str = "alternating"
    unlearn_fraction: float = 0.5

    @property
    def is_synthetic(self) -> bool:
        return self.train is None


@dataclass(frozen=True)
class FinetuneSettings:
    epochs: int = 40
    lr: float = 0.5
    batch_size: int = 16
    clip_norm: Optional[float] = DEFAULT_CLIP_NORM


@dataclass(frozen=True)
class SweepSettings:
    """λ values every sweep method is re-run with; an empty grid skips the sweep."""

    lambda_grid: tuple[float, ...] = ()
    methods: tuple[str, ...] = tuple(SWEEP_METHODS)


@dataclass(frozen=True)
class BoundsSettings:
    epsilon: float = 0.1
    n_paths: int = 8


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "runs/forgetmari"
    corpus: CorpusSettings = CorpusSettings()
    vocab_level: str = "char"
    model: ModelArch = ModelArch(vocab_size=2)
    seq_len: int = DEFAULT_SEQ_LEN
    finetune: FinetuneSettings = FinetuneSettings()
    unlearn: UnlearnConfig = UnlearnConfig()
    compare_methods: tuple[str, ...] = ()
    sweep: SweepSettings = SweepSettings()
    detector: DetectorConfig = DetectorConfig()
    bounds: BoundsSettings = BoundsSettings()

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ExperimentConfig":
        """Build from a (possibly partial) config dict; missing keys take defaults."""
        d = _merge_config(DEFAULTS, d)
        validate_experiment_dict(d)
        c, m, ft, ul = d["corpus"], d["model"], d["finetune"], d["unlearn"]
        seed = int(d["seed"])
        return cls(
            seed=seed,
            output_dir=d["output_dir"],
            corpus=CorpusSettings(
                train=c["train"],
                validation=c["validation"],
                holdout=c["holdout"],
                synthetic=SyntheticSettings(**c["synthetic"]),
                split_mode=c["split"]["mode"],
                unlearn_fraction=c["split"]["unlearn_fraction"],
            ),
            vocab_level=d["vocab"]["level"],
            # vocab_size is fixed once the corpus is read
            model=ModelArch(
                vocab_size=2,
                context_len=m["context_len"],
                embed_dim=m["embed_dim"],
                hidden_dim=m["hidden_dim"],
            ),
            seq_len=m["seq_len"],
            finetune=FinetuneSettings(**ft),
            unlearn=UnlearnConfig(
                method=ul["method"],
                lambda_=ul["lambda"],
                mode=ul["mode"],
                lr=ul["lr"],
                epochs=ul["epochs"],
                batch_size=ul["batch_size"],
                seed=seed,
                early_stop_val_drop=ul["early_stop_val_drop"],
                stop_policy=ul["stop_policy"],
                alpha_policy=ul["alpha_policy"],
                clip_norm=ul["clip_norm"],
                detector_stop_auc=ul["detector_stop_auc"],
                k_fraction=d["detector"]["k_fraction"],
                optimizer=ul["optimizer"],
            ),
            compare_methods=tuple(d["compare_methods"]),
            sweep=SweepSettings(
                lambda_grid=tuple(float(v) for v in d["sweep"]["lambda_grid"]),
                methods=tuple(d["sweep"]["methods"]),
            ),
            detector=DetectorConfig(**d["detector"]),
            bounds=BoundsSettings(**d["bounds"]),
        )

    def to_dict(self) -> Dict[str, Any]:
        c, ul = self.corpus, self.unlearn
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "corpus": {
                "train": c.train,
                "validation": c.validation,
                "holdout": c.holdout,
                "synthetic": {
                    "n_sentences": c.synthetic.n_sentences,
                    "overlap": c.synthetic.overlap,
                    "n_holdout": c.synthetic.n_holdout,
                    "n_validation": c.synthetic.n_validation,
                },
                "split": {"mode": c.split_mode, "unlearn_fraction": c.unlearn_fraction},
            },
            "vocab": {"level": self.vocab_level},
            "model": {
                "context_len": self.model.context_len,
                "embed_dim": self.model.embed_dim,
                "hidden_dim": self.model.hidden_dim,
                "seq_len": self.seq_len,
            },
            "finetune": {
                "epochs": self.finetune.epochs,
                "lr": self.finetune.lr,
                "batch_size": self.finetune.batch_size,
                "clip_norm": self.finetune.clip_norm,
            },
            "unlearn": {
                "method": ul.method,
                "lambda": ul.lambda_,
                "mode": ul.mode,
                "epochs": ul.epochs,
                "lr": ul.lr,
                "batch_size": ul.batch_size,
                "early_stop_val_drop": ul.early_stop_val_drop,
                "stop_policy": ul.stop_policy,
                "alpha_policy": ul.alpha_policy,
                "clip_norm": ul.clip_norm,
                "detector_stop_auc": ul.detector_stop_auc,
                "optimizer": ul.optimizer,
            },
            "compare_methods": list(self.compare_methods),
            "sweep": {
                "lambda_grid": list(self.sweep.lambda_grid),
                "methods": list(self.sweep.methods),
            },
            "detector": {
                "detector": self.detector.detector,
                "k_fraction": self.detector.k_fraction,
            },
            "bounds": {"epsilon": self.bounds.epsilon, "n_paths": self.bounds.n_paths},
        }

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.corpus.split_mode, self.corpus.unlearn_fraction, self.seed)

    def finetune_config(self) -> UnlearnConfig:
        ft = self.finetune
        return UnlearnConfig(
            method="none",
            lr=ft.lr,
            epochs=ft.epochs,
            batch_size=ft.batch_size,
            seed=self.seed,
            stop_policy="none",
            clip_norm=ft.clip_norm,
            optimizer="sgd",
        )

    def unlearn_config(self, method: Optional[str] = None) -> UnlearnConfig:
        """The unlearning config, optionally with another method under the same budget."""
        if method is None or method == self.unlearn.method:
            return self.unlearn
        d = {f: getattr(self.unlearn, f) for f in self.unlearn.__dataclass_fields__}
        d["method"] = method
        return UnlearnConfig(**d)


def _load_schema() -> dict:
    with open(EXPERIMENT_SCHEMA_PATH, "r") as f:
        return yaml.safe_load(f)


def validate_experiment_dict(d: Dict[str, Any]) -> bool:
    """Validate a config dict against the experiment schema.

    Raises InvalidConfigError, which enumerates the errors in ``.errors``.
    """
    validator = Draft7Validator(_load_schema())
    if not validator.is_valid(d):
        errors = sorted(validator.iter_errors(d), key=lambda e: list(e.path))
        raise InvalidConfigError("Validation failed", [e.message for e in errors])
    return True


def _deep_copy_dict(d: Dict[str, Any]) -> Dict[str, Any]:
    result = {}
    for key, value in d.items():
        if isinstance(value, dict):
            result[key] = _deep_copy_dict(value)
        elif isinstance(value, list):
            result[key] = [
                _deep_copy_dict(item) if isinstance(item, dict) else item for item in value
            ]
        else:
            result[key] = value
    return result


def _merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    Merge override config into base config.

    Lists are replaced entirely, not merged.
    """
    result = _deep_copy_dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and key in result and isinstance(result[key], dict):
            result[key] = _merge_config(result[key], value)
        else:
            result[key] = value
    return result


def _coerce_value(value: str) -> Any:
    """Coerce a string value to bool, int, float, or keep as string."""
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def _set_dotted(config: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    current = config
    for part in parts[:-1]:
        current = current.setdefault(part, {})
    current[parts[-1]] = value


def _apply_env_overrides(config: Dict[str, Any]) -> Dict[str, Any]:
    """Apply MARI_* environment variable overrides to config."""
    result = _deep_copy_dict(config)
    for env_var, mapping in ENV_VAR_MAPPINGS.items():
        value = os.environ.get(env_var)
        if value is None:
            continue
        if env_var == "MARI_OUTPUT_DIR":
            coerced = value
        else:
            coerced = _coerce_value(value)
        if isinstance(mapping, tuple):
            section, key = mapping
            result.setdefault(section, {})[key] = coerced
        else:
            result[mapping] = coerced
        _LOGGER.debug(f"{env_var} overrides {mapping}")
    return result


def _resolve_paths(config: Dict[str, Any], base: Path) -> None:
    corpus = config["corpus"]
    for key in ("train", "validation", "holdout"):
        if corpus.get(key):
            p = Path(corpus[key]).expanduser()
            corpus[key] = str(p if p.is_absolute() else (base / p))


def _check_paths(config: Dict[str, Any]) -> None:
    corpus = config["corpus"]
    if corpus["train"] is None:
        return
    problems = []
    for key in ("train", "validation", "holdout"):
        if corpus[key] is None:
            problems.append(f"corpus.{key} is required when corpus.train is set")
        elif not Path(corpus[key]).exists():
            problems.append(f"corpus.{key} does not exist: {corpus[key]}")
    if problems:
        raise InvalidConfigError("Referenced corpus files are missing", problems)


def load_experiment_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Resolve an experiment config from defaults, a JSON file, the environment and
    dotted-key overrides (e.g. ``{"unlearn.lambda": 0.5}``).

    Relative corpus paths are taken relative to the config file.
    """
    config = _deep_copy_dict(DEFAULTS)
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        with open(path, "r", encoding="utf-8") as f:
            try:
                file_config = json.load(f)
            except json.JSONDecodeError as e:
                raise InvalidConfigError(f"{path} is not valid JSON", [str(e)])
        if not isinstance(file_config, dict):
            raise InvalidConfigError(f"{path} must hold a JSON object", [])
        config = _merge_config(config, file_config)
        base = path.resolve().parent
    config = _apply_env_overrides(config)
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(config, key, value)
    validate_experiment_dict(config)
    _resolve_paths(config, base)
    _check_paths(config)
    return ExperimentConfig.from_dict(config)


def write_experiment_config(cfg: ExperimentConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return path
