from .features import (
    FEATURE_NAMES,
    LONG_WORD_MIN_CHARS,
    LinguisticFeatureVector,
    count_dale_chall_difficult,
    extract_features,
    feature_table,
    pearson,
    rank_features,
)
from .tokenize import Pos, Token, TokenizedText, tokenize

__all__ = [
    "FEATURE_NAMES",
    "LONG_WORD_MIN_CHARS",
    "LinguisticFeatureVector",
    "Pos",
    "Token",
    "TokenizedText",
    "count_dale_chall_difficult",
    "extract_features",
    "feature_table",
    "pearson",
    "rank_features",
    "tokenize",
]
