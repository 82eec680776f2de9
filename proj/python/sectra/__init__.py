"""Section-weighted query-by-example paper recommendation primitives."""

from ._sectra import (
    average_precision,
    classify_sentence,
    cosine,
    hard_negatives,
    hashed_embed,
    l2_distance,
    reciprocal_rank,
    represent_paper,
    section_abstract,
    split_sentences,
    triplet_loss,
)

__all__ = [
    "average_precision",
    "classify_sentence",
    "cosine",
    "hard_negatives",
    "hashed_embed",
    "l2_distance",
    "reciprocal_rank",
    "represent_paper",
    "section_abstract",
    "split_sentences",
    "triplet_loss",
]
