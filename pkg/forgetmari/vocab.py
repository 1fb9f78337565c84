"""Character- and word-level vocabularies with reserved <pad>/<bos> ids."""

import logging
from dataclasses import dataclass, field
from typing import Iterable

from .const import BOS_ID, BOS_SYMBOL, MAX_VOCAB_SIZE, PAD_ID, PAD_SYMBOL, VOCAB_LEVELS
from .exceptions import DomainError, UnknownSymbol

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Vocabulary:
    """Ordered, contiguous symbol <-> id bijection.

    ``symbols[0]`` is ``<pad>`` and ``symbols[1]`` is ``<bos>``; corpus symbols
    follow in sorted order.
    """

    symbols: tuple[str, ...]
    level: str = "char"
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.level not in VOCAB_LEVELS:
            raise DomainError(
                f"vocabulary level must be one of {VOCAB_LEVELS}, got {self.level!r}"
            )
        if len(self.symbols) > MAX_VOCAB_SIZE:
            raise DomainError(f"vocabulary of {len(self.symbols)} exceeds {MAX_VOCAB_SIZE}")
        if self.symbols[PAD_ID] != PAD_SYMBOL or self.symbols[BOS_ID] != BOS_SYMBOL:
            raise DomainError("ids 0 and 1 are reserved for <pad> and <bos>")
        index = {s: i for i, s in enumerate(self.symbols)}
        if len(index) != len(self.symbols):
            raise DomainError("vocabulary symbols must be distinct")
        object.__setattr__(self, "_index", index)

    @classmethod
    def build(cls, texts: Iterable[str], level: str = "char") -> "Vocabulary":
        """Collect every symbol appearing in ``texts``."""
        seen = set()
        for text in texts:
            seen.update(_tokenize(text, level))
        seen.discard(PAD_SYMBOL)
        seen.discard(BOS_SYMBOL)
        vocab = cls(symbols=(PAD_SYMBOL, BOS_SYMBOL, *sorted(seen)), level=level)
        _LOGGER.debug(f"Built {level} vocabulary of {vocab.size} symbols")
        return vocab

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def pad_id(self) -> int:
        return PAD_ID

    @property
    def bos_id(self) -> int:
        return BOS_ID

    def encode(self, text: str) -> list[int]:
        ids = []
        for sym in _tokenize(text, self.level):
            try:
                ids.append(self._index[sym])
            except KeyError:
                raise UnknownSymbol(f"symbol {sym!r} is not in the vocabulary")
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        joiner = "" if self.level == "char" else " "
        return joiner.join(self.symbols[i] for i in ids if i not in (PAD_ID, BOS_ID))

    def to_dict(self) -> dict:
        return {"level": self.level, "symbols": list(self.symbols)}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(symbols=tuple(d["symbols"]), level=d.get("level", "char"))


def _tokenize(text: str, level: str) -> list[str]:
    if level == "char":
        return list(text)
    return text.split()
