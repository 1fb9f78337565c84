"""
Corpus commands.

Commands:
    ingest  - Convert plain text (or generate the synthetic corpus) to JSON-lines
    split   - Split a corpus into unlearn and retain sets
"""

from pathlib import Path
from typing import Optional

import typer

from forgetmari.cli._common import choice, unit_interval
from forgetmari.cli.output import EXIT_SUCCESS, print_json, runtime_errors
from forgetmari.const import SPLIT_MODES
from forgetmari.corpus import (
    Corpus,
    SplitSpec,
    ingest_text,
    load_corpus,
    make_split,
    synthesize_corpus,
    write_corpus,
)


def ingest(
    source: Optional[Path] = typer.Argument(
        None,
        help="Plain-text (or .jsonl) file to convert",
        exists=True,
        dir_okay=False,
        readable=True,
    ),
    output: Path = typer.Option(
        ...,
        "--output",
        "-o",
        help="Output .jsonl file, or output directory with --synthetic",
    ),
    synthetic: Optional[int] = typer.Option(
        None,
        "--synthetic",
        min=2,
        help="Generate a synthetic desk corpus with this many training sentences",
    ),
    overlap: float = typer.Option(
        0.0,
        "--overlap",
        callback=unit_interval,
        help="Chance each synthetic word slot draws from the shared pool",
    ),
    seed: int = typer.Option(0, "--seed", help="Seed of the synthetic corpus"),
) -> None:
    """
    Write a corpus as JSON-lines, one {"text": ...} object per document.

    With --synthetic, OUTPUT is a directory receiving train.jsonl,
    validation.jsonl and holdout.jsonl.
    """
    if (source is None) == (synthetic is None):
        raise typer.BadParameter("give either SOURCE or --synthetic, not both or neither")
    with runtime_errors():
        if synthetic is not None:
            corpora = synthesize_corpus(synthetic, overlap, seed)
            written = {
                name: str(write_corpus(getattr(corpora, name), output / f"{name}.jsonl"))
                for name in ("train", "validation", "holdout")
            }
            print_json({"documents": len(corpora.train), "files": written})
        else:
            if source.suffix == ".jsonl":
                corpus = load_corpus(source)
            else:
                corpus = ingest_text(source.read_text(encoding="utf-8"), str(source))
            write_corpus(corpus, output)
            print_json({"documents": len(corpus), "file": str(output)})
    raise typer.Exit(EXIT_SUCCESS)


def split(
    corpus: Path = typer.Argument(
        ...,
        help="JSON-lines corpus to split",
        exists=True,
        dir_okay=False,
        readable=True,
    ),
    output_dir: Path = typer.Option(
        ...,
        "--output-dir",
        "-o",
        help="Directory receiving unlearn.jsonl and retain.jsonl",
    ),
    mode: str = typer.Option(
        "alternating",
        "--mode",
        callback=choice(SPLIT_MODES),
        help="alternating (even sentences unlearned) or ratio (seeded shuffle)",
    ),
    fraction: float = typer.Option(
        0.5,
        "--fraction",
        help="Unlearn fraction in ratio mode",
    ),
    seed: int = typer.Option(0, "--seed", help="Shuffle seed in ratio mode"),
) -> None:
    """
    Split a corpus into sentence-level unlearn (D_u) and retain (D_r) sets.
    """
    if not 0.0 < fraction < 1.0:
        raise typer.BadParameter(f"--fraction must lie in (0, 1), got {fraction}")
    with runtime_errors():
        sentences = load_corpus(corpus).sentences()
        d_u, d_r = make_split(sentences, SplitSpec(mode, fraction, seed))
        u_path = write_corpus(
            Corpus(tuple(d_u), f"{corpus}:unlearn"), output_dir / "unlearn.jsonl"
        )
        r_path = write_corpus(Corpus(tuple(d_r), f"{corpus}:retain"), output_dir / "retain.jsonl")
        print_json(
            {
                "sentences": len(sentences),
                "unlearn": {"count": len(d_u), "file": str(u_path)},
                "retain": {"count": len(d_r), "file": str(r_path)},
            }
        )
    raise typer.Exit(EXIT_SUCCESS)
