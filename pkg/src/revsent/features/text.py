"""Text preprocessing for the classical (bag-of-words) and deep paths."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from revsent.features.stemmer import stem

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1
N_MAX = 50
R_MAX = 10
STOPWORDS_VERSION = "stopwords_en_v1"

_PUNCT = re.compile(r"[^\w\s']|_")
_SENTENCE_END = re.compile(r"[.!?]+")
_TOKEN = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    text = resources.files("revsent.resources").joinpath(f"{STOPWORDS_VERSION}.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def classical_tokens(text: str) -> list[str]:
    """lowercase, strip punctuation, whitespace-split, drop stopwords, stem."""
    cleaned = _PUNCT.sub(" ", text.lower())
    stops = stopwords()
    out = []
    for tok in cleaned.split():
        tok = tok.strip("'")
        if not tok or tok in stops:
            continue
        out.append(stem(tok))
    return out


def split_sentences(text: str) -> list[list[str]]:
    """Sentence split on . ! ? then lowercase word tokens, order preserved."""
    sentences = []
    for chunk in _SENTENCE_END.split(text.lower()):
        toks = _TOKEN.findall(chunk)
        if toks:
            sentences.append(toks)
    return sentences


class Vocabulary:
    """Token <-> id map with ``<pad>`` = 0 and ``<unk>`` = 1."""

    def __init__(self, tokens: Sequence[str]):
        if list(tokens[:2]) != [PAD, UNK]:
            raise ValueError("vocabulary must start with <pad>, <unk>")
        self.itos = list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    @classmethod
    def build(cls, texts: Iterable[str], min_freq: int = 1, max_size: int | None = None) -> "Vocabulary":
        counts = Counter(t for text in texts for sent in split_sentences(text) for t in sent)
        items = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
        if max_size is not None:
            items = items[: max(0, max_size - 2)]
        return cls([PAD, UNK] + items)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def token(self, i: int) -> str:
        return self.itos[i]

    def to_json(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_json(cls, tokens) -> "Vocabulary":
        return cls(tokens)


@dataclass
class TokenizedReview:
    """Sentence-segmented ids for HAN plus a flat id stream for CNN.

    Lists are unpadded (but truncated); the ``padded_*`` helpers produce the
    fixed-size arrays used for batching.  Padding id is 0.
    """

    sentences: list[list[int]]
    flat_tokens: list[int]
    sentence_tokens: list[list[str]]
    flat_words: list[str]
    n_max: int = N_MAX
    r_max: int = R_MAX

    @property
    def is_empty(self) -> bool:
        return all(i == PAD_ID for i in self.flat_tokens)

    def padded_flat(self, length: int | None = None) -> np.ndarray:
        length = self.n_max if length is None else length
        out = np.zeros(length, dtype=np.int64)
        ids = self.flat_tokens[:length]
        out[: len(ids)] = ids
        return out

    def padded_sentences(self, r: int | None = None, n: int | None = None) -> np.ndarray:
        r = self.r_max if r is None else r
        n = self.n_max if n is None else n
        out = np.zeros((r, n), dtype=np.int64)
        for i, sent in enumerate(self.sentences[:r]):
            ids = sent[:n]
            out[i, : len(ids)] = ids
        return out


def tokenize_review(text: str, vocab: Vocabulary, n_max: int = N_MAX, r_max: int = R_MAX) -> TokenizedReview:
    full = split_sentences(text)
    if not full:
        return TokenizedReview([[PAD_ID]], [PAD_ID], [[PAD]], [PAD], n_max, r_max)
    sents = [s[:n_max] for s in full[:r_max]]
    ids = [[vocab.id(t) for t in s] for s in sents]
    flat_words = [t for s in full for t in s][:n_max]
    return TokenizedReview(ids, [vocab.id(t) for t in flat_words], sents, flat_words, n_max, r_max)


def preprocess_text(text: str, for_deep: bool = False, vocab: Vocabulary | None = None,
                    n_max: int = N_MAX, r_max: int = R_MAX):
    """Classical path returns stemmed tokens (``["<pad>"]`` if nothing
    survives); deep path returns a :class:`TokenizedReview` and needs ``vocab``."""
    if not for_deep:
        return classical_tokens(text) or [PAD]
    if vocab is None:
        raise ValueError("deep preprocessing needs a vocabulary")
    return tokenize_review(text, vocab, n_max, r_max)
