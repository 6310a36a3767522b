"""TF-IDF embeddings of observation text and their cosine similarity."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import EmptyCorpus

_TOKEN = re.compile(r"[^\W_]+")


@lru_cache(maxsize=1 << 16)
def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return tuple(_TOKEN.findall(text.lower()))


@dataclass(frozen=True)
class Vocabulary:
    index: dict[str, int]
    document_frequency: tuple[int, ...]
    corpus_size: int
    idf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        df = np.asarray(self.document_frequency, dtype=float)
        # smoothed idf: ln((1 + n) / (1 + df)) + 1
        object.__setattr__(self, "idf", np.log((1.0 + self.corpus_size) / (1.0 + df)) + 1.0)

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def df(self, term: str) -> int:
        return self.document_frequency[self.index[term]]


def build_vocabulary(corpus: Sequence[str]) -> Vocabulary:
    if len(corpus) == 0:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    index: dict[str, int] = {}
    df: list[int] = []
    for text in corpus:
        for term in dict.fromkeys(tokenize(text)):
            j = index.get(term)
            if j is None:
                index[term] = len(df)
                df.append(1)
            else:
                df[j] += 1
    return Vocabulary(index, tuple(df), len(corpus))


@dataclass(frozen=True)
class SparseVector:
    """Sorted term indices with their weights."""

    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        w = np.asarray(self.weights, dtype=float)
        if idx.shape != w.shape or idx.ndim != 1:
            raise ValueError("indices and weights must be 1-D and the same length")
        if idx.size > 1 and not np.all(np.diff(idx) > 0):
            raise ValueError("indices must be strictly increasing")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_dict(cls, items: dict[int, float]) -> "SparseVector":
        keys = sorted(items)
        return cls(np.array(keys, dtype=np.int64), np.array([items[k] for k in keys], dtype=float))

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.weights, self.weights)))

    def is_zero(self) -> bool:
        return not np.any(self.weights)

    def normalize(self) -> "SparseVector":
        n = self.norm
        if n == 0.0:
            return self
        return SparseVector(self.indices, self.weights / n)

    def to_dense(self, size: int) -> np.ndarray:
        out = np.zeros(size)
        out[self.indices] = self.weights
        return out


def vectorize(text: str, vocab: Vocabulary) -> SparseVector:
    """Raw-count tf times smoothed idf, L2-normalized. Unknown terms are ignored."""
    counts = Counter(t for t in tokenize(text) if t in vocab.index)
    if not counts:
        return SparseVector(np.zeros(0, dtype=np.int64), np.zeros(0))
    items = {vocab.index[t]: c * vocab.idf[vocab.index[t]] for t, c in counts.items()}
    return SparseVector.from_dict(items).normalize()


def cosine(u: SparseVector, v: SparseVector) -> float:
    """Cosine similarity; 0 when either vector is all-zero."""
    nu, nv = u.norm, v.norm
    if nu == 0.0 or nv == 0.0:
        return 0.0
    _, iu, iv = np.intersect1d(u.indices, v.indices, assume_unique=True, return_indices=True)
    dot = float(np.dot(u.weights[iu], v.weights[iv]))
    return max(-1.0, min(1.0, dot / (nu * nv)))


def similarity_matrix(vectors: Sequence[SparseVector], vocab_size: int) -> np.ndarray:
    """Pairwise cosine similarities of a small set of vectors, computed densely."""
    n = len(vectors)
    dense = np.zeros((n, vocab_size))
    for row, vec in enumerate(vectors):
        nrm = vec.norm
        if nrm > 0.0:
            dense[row, vec.indices] = vec.weights / nrm
    sims = dense @ dense.T
    return np.clip(sims, -1.0, 1.0)
