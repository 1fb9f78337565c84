"""Shared option helpers for the forgetmari CLI commands."""

from pathlib import Path
from typing import Callable, Optional, Sequence

import typer

from forgetmari.checkpoint import load_checkpoint
from forgetmari.corpus import load_corpus
from forgetmari.exceptions import CheckpointFormatError
from forgetmari.langmodel import ModelCheckpoint, SequenceBatch
from forgetmari.vocab import Vocabulary


def choice(values: Sequence[str]) -> Callable[[Optional[str]], Optional[str]]:
    """Option callback rejecting anything outside ``values`` as a usage error."""

    def check(value: Optional[str]) -> Optional[str]:
        if value is not None and value not in values:
            raise typer.BadParameter(f"'{value}' is not one of {', '.join(values)}")
        return value

    return check


def unit_interval(value: Optional[float]) -> Optional[float]:
    if value is not None and not 0.0 <= value <= 1.0:
        raise typer.BadParameter(f"{value} is not in [0, 1]")
    return value


def fraction(value: Optional[float]) -> Optional[float]:
    if value is not None and not 0.0 < value <= 1.0:
        raise typer.BadParameter(f"{value} is not in (0, 1]")
    return value


def positive(value: Optional[float]) -> Optional[float]:
    if value is not None and not value > 0.0:
        raise typer.BadParameter(f"{value} is not positive")
    return value


def read_sentences(path: Path) -> list[str]:
    return load_corpus(path).sentences()


def encode_file(vocab: Vocabulary, path: Path, T: int) -> SequenceBatch:
    return SequenceBatch.from_texts(vocab, read_sentences(path), T)


def corpus_option(flag: str, help_text: str, required: bool = True):
    return typer.Option(
        ... if required else None,
        flag,
        help=help_text,
        exists=True,
        dir_okay=False,
        readable=True,
    )


def load_model(path: Path) -> ModelCheckpoint:
    """Load a checkpoint that carries its vocabulary."""
    ckpt = load_checkpoint(path)
    if ckpt.vocab is None:
        raise CheckpointFormatError(f"{path} carries no vocabulary")
    return ckpt
