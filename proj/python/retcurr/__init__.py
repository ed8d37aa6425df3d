"""Retrieval-difficulty curriculum engine."""

from ._core import (
    Corpus,
    HashMismatchError,
    Run,
    TextIndex,
    compute_advantages,
    generate_corpus,
    load_corpus,
    phi_for_gap,
    propagate,
    recall_at_k,
    train,
)

__all__ = [
    "Corpus",
    "HashMismatchError",
    "Run",
    "TextIndex",
    "compute_advantages",
    "generate_corpus",
    "load_corpus",
    "phi_for_gap",
    "propagate",
    "recall_at_k",
    "train",
]
