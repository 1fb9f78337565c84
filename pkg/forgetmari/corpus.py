"""
Corpora, sentence splitting and unlearn/retain splits.

Corpus files are JSON-lines, one ``{"text": ...}`` object per document.
"""

import json
import logging
import math
import os
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from . import rng as rng_streams
from .const import PARTIAL_SUFFIX, SPLIT_MODES
from .exceptions import DomainError, EmptyText, TooFewSentences

_LOGGER = logging.getLogger(__name__)

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def normalize_text(text: str) -> str:
    """NFC-normalize and strip control characters other than newline."""
    text = unicodedata.normalize("NFC", text)
    return "".join(c for c in text if c == "\n" or unicodedata.category(c) != "Cc")


@dataclass(frozen=True)
class Corpus:
    documents: tuple[str, ...]
    provenance: str = ""

    def __post_init__(self):
        docs = tuple(d for d in (normalize_text(d) for d in self.documents) if d.strip())
        if not docs:
            raise EmptyText("a corpus needs at least one nonempty document")
        object.__setattr__(self, "documents", docs)

    def __len__(self) -> int:
        return len(self.documents)

    def sentences(self) -> list[str]:
        out = []
        for doc in self.documents:
            out.extend(split_sentences(doc))
        return out


def split_sentences(text: str) -> list[str]:
    """Split after '.', '!' or '?' followed by whitespace; delimiters stay attached.

    Abbreviations such as "Mr." end a sentence under this rule.
    """
    if not text or not text.strip():
        raise EmptyText("cannot split empty text")
    return [s.strip() for s in _SENTENCE_END.split(text.strip()) if s.strip()]


def load_corpus(path: Union[str, Path]) -> Corpus:
    path = Path(path)
    documents = []
    with open(path, "r", encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                documents.append(json.loads(line)["text"])
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise DomainError(f"{path}:{n}: expected a JSON object with a 'text' field ({e})")
    return Corpus(tuple(documents), provenance=str(path))


def write_corpus(corpus: Corpus, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + PARTIAL_SUFFIX)
    with open(partial, "w", encoding="utf-8") as f:
        for doc in corpus.documents:
            f.write(json.dumps({"text": doc}, ensure_ascii=False) + "\n")
    os.replace(partial, path)
    _LOGGER.debug(f"Wrote {len(corpus)} documents to {path}")
    return path


def ingest_text(text: str, provenance: str = "") -> Corpus:
    """Plain text as a one-document corpus."""
    return Corpus((text,), provenance=provenance)


# ============================================================
# Splits
# ============================================================


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "alternating"
    unlearn_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in SPLIT_MODES:
            raise DomainError(f"mode must be one of {SPLIT_MODES}, got {self.mode!r}")
        if not 0.0 < self.unlearn_fraction < 1.0:
            raise DomainError(f"unlearn_fraction must lie in (0, 1), got {self.unlearn_fraction}")


def make_split(sentences: list[str], spec: SplitSpec = SplitSpec()) -> tuple[list[str], list[str]]:
    """(D_u, D_r). Alternating mode puts even 0-based indices in D_u."""
    n = len(sentences)
    if n < 2:
        raise TooFewSentences(f"a split needs at least 2 sentences, got {n}")
    if spec.mode == "alternating":
        return list(sentences[0::2]), list(sentences[1::2])
    order = rng_streams.stream(spec.seed, "split", "shuffle").permutation(n)
    # keep both sides nonempty
    n_u = min(max(math.ceil(spec.unlearn_fraction * n - 1e-9), 1), n - 1)
    chosen = set(int(i) for i in order[:n_u])
    unlearn = [s for i, s in enumerate(sentences) if i in chosen]
    retain = [s for i, s in enumerate(sentences) if i not in chosen]
    return unlearn, retain


# ============================================================
# Synthetic desk corpus
# ============================================================

_SHARED_WORDS = {
    "noun": ["cat", "dog", "boy", "girl", "man"],
    "verb": ["saw", "met", "had", "led"],
    "adj": ["old", "big", "red", "wet"],
}

_FAMILY_WORDS = {
    "unlearn": {
        "noun": ["ship", "crew", "sail", "mast", "gull", "wave"],
        "verb": ["rows", "hauls", "sinks", "steers"],
        "adj": ["salty", "rough", "grey", "windy"],
    },
    "retain": {
        "noun": ["rose", "hoe", "seed", "bee", "vine", "pear"],
        "verb": ["digs", "plants", "picks", "grows"],
        "adj": ["green", "sunny", "ripe", "soft"],
    },
}

_TEMPLATES = [
    ("the", "{adj}", "{noun}", "{verb}", "a", "{noun}"),
    ("a", "{noun}", "{verb}", "the", "{adj}", "{noun}"),
    ("my", "{noun}", "{verb}", "{adj}", "{nouns}"),
]

# (letter case, word separator, terminator). The unlearn family has a script of
# its own so none of its characters occur in retain text; shared-pool words keep
# the retain script.
_SCRIPTS = {
    "unlearn": (str.upper, "_", "!"),
    "retain": (str.lower, " ", "."),
}


@dataclass
class SyntheticCorpus:
    train: Corpus
    validation: Corpus
    holdout: Corpus
    families: list[str] = field(default_factory=list)


def _word(gen, family: str, slot: str, overlap: float) -> tuple[str, bool]:
    shared = bool(gen.random() < overlap)
    pool = _SHARED_WORDS[slot] if shared else _FAMILY_WORDS[family][slot]
    return pool[int(gen.integers(len(pool)))], shared


def _sentence(gen, family: str, overlap: float) -> str:
    case, sep, end = _SCRIPTS[family]
    words = []
    for token in _TEMPLATES[int(gen.integers(len(_TEMPLATES)))]:
        if not token.startswith("{"):
            words.append(case(token))
            continue
        slot = token.strip("{}")
        word, shared = _word(gen, family, "noun" if slot == "nouns" else slot, overlap)
        word += "s" if slot == "nouns" else ""
        words.append(word if shared else case(word))
    return sep.join(words) + end


def _fresh(gen, family: str, overlap: float, n: int, seen: set, max_tries: int) -> list[str]:
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > max_tries:
            raise DomainError(f"could not draw {n} distinct '{family}' sentences")
        s = _sentence(gen, family, overlap)
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def synthesize_corpus(
    n_sentences: int = 200,
    overlap: float = 0.0,
    seed: int = 0,
    n_holdout: int = 0,
    n_validation: int = 0,
) -> SyntheticCorpus:
    """Templated two-genre corpus for desk-scale experiments.

    Even-indexed training sentences come from the "unlearn" family and odd
    ones from the "retain" family, so an alternating split separates the
    genres. The unlearn family uses its own script, upper case with "_" and
    "!", so the two genres share no characters at ``overlap=0``. ``overlap``
    is the chance each slot draws from a shared word pool, written in the
    retain script in both families. Holdout sentences are fresh unlearn-family
    sentences, as many as D_u by default; validation sentences are fresh
    retain-family sentences. All sentences are distinct.
    """
    if n_sentences < 2:
        raise TooFewSentences(f"need at least 2 sentences, got {n_sentences}")
    if not 0.0 <= overlap <= 1.0:
        raise DomainError(f"overlap must lie in [0, 1], got {overlap}")
    n_holdout = n_holdout or max(n_sentences // 2, 1)
    n_validation = n_validation or max(n_sentences // 4, 1)
    gen = rng_streams.stream(seed, "corpus", "synthetic")
    max_tries = 100 * (n_sentences + n_holdout + n_validation)

    seen: set = set()
    n_u = (n_sentences + 1) // 2
    unlearn = _fresh(gen, "unlearn", overlap, n_u, seen, max_tries)
    retain = _fresh(gen, "retain", overlap, n_sentences - n_u, seen, max_tries)
    train = [unlearn[i // 2] if i % 2 == 0 else retain[i // 2] for i in range(n_sentences)]
    holdout = _fresh(gen, "unlearn", overlap, n_holdout, seen, max_tries)
    validation = _fresh(gen, "retain", overlap, n_validation, seen, max_tries)

    label = f"synthetic(n={n_sentences}, overlap={overlap}, seed={seed})"
    return SyntheticCorpus(
        train=Corpus(tuple(train), provenance=label),
        validation=Corpus(tuple(validation), provenance=label + ":validation"),
        holdout=Corpus(tuple(holdout), provenance=label + ":holdout"),
        families=["unlearn" if i % 2 == 0 else "retain" for i in range(n_sentences)],
    )
