"""The ten surface linguistic features and their correlation ranking.

Counting conventions (frozen; changing any of these silently shifts every
downstream prompt and report):

* ``unique_word_count``: words occurring exactly once, case-sensitive and
  otherwise unnormalized.
* ``word_count`` / ``sentence_count``: token- and span-counts from the
  bundled tokenizer.
* ``essay_char_length``: non-space, non-punctuation characters of the raw
  text; ``total_char_count``: alphanumeric characters of the word tokens.
  The two can differ and both are reported.
* ``lemma_count``: distinct lemmas over the (lowercased) word tokens.
* ``noun_count`` / ``stopword_count``: distinct noun-tagged / stop-listed
  surface forms, case-sensitive.  These are set sizes, not token tallies;
  token tallies run roughly twice as high on student essays and do not
  match the golden example counts.
* ``dale_chall_difficult_count``: word tokens whose lowercased surface is
  absent from the familiar-word list; numerals and anonymization tokens
  are excluded.
* ``long_word_count``: word tokens with at least 7 alphanumeric characters.
"""
from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence

from . import resources
from .tokenize import Pos, TokenizedText, tokenize

LONG_WORD_MIN_CHARS = 7


@dataclass(frozen=True)
class LinguisticFeatureVector:
    """Field order is the canonical report/prompt order."""
    unique_word_count: int
    word_count: int
    sentence_count: int
    essay_char_length: int
    lemma_count: int
    noun_count: int
    stopword_count: int
    dale_chall_difficult_count: int
    total_char_count: int
    long_word_count: int

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


FEATURE_NAMES: tuple[str, ...] = tuple(f.name for f in fields(LinguisticFeatureVector))


def _alnum_len(surface: str) -> int:
    return sum(1 for ch in surface if ch.isalnum())


def count_dale_chall_difficult(tokenized: TokenizedText,
                               word_list: frozenset[str] | set[str] | None = None) -> int:
    """Word tokens (not types) absent from the familiar-word list.

    Numerals and anonymization tokens never count as difficult.
    """
    if word_list is None:
        word_list = resources.dale_chall_words()
    if not word_list:
        raise ValueError("Dale-Chall resource missing")
    count = 0
    for tok in tokenized.words():
        if tok.surface.startswith("@") or tok.normalized.isdigit():
            continue
        if tok.normalized not in word_list:
            count += 1
    return count


def extract_features(text: str) -> LinguisticFeatureVector:
    """Compute all ten features; a pure function of the text and resources."""
    tokenized = tokenize(text)
    words = tokenized.words()

    surface_counts = Counter(t.surface for t in words)
    essay_char_length = sum(
        1 for ch in text
        if not ch.isspace() and not unicodedata.category(ch).startswith(("P", "S"))
    )
    return LinguisticFeatureVector(
        unique_word_count=sum(1 for n in surface_counts.values() if n == 1),
        word_count=len(words),
        sentence_count=tokenized.sentence_count,
        essay_char_length=essay_char_length,
        lemma_count=len({t.lemma for t in words}),
        noun_count=len({t.surface for t in words if t.pos is Pos.NOUN}),
        stopword_count=len({t.surface for t in words if t.is_stopword}),
        dale_chall_difficult_count=count_dale_chall_difficult(tokenized),
        total_char_count=sum(_alnum_len(t.surface) for t in words),
        long_word_count=sum(1 for t in words if _alnum_len(t.surface) >= LONG_WORD_MIN_CHARS),
    )


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation; raises on size or variance degeneracy."""
    if len(x) != len(y):
        raise ValueError("length mismatch")
    if len(x) < 2:
        raise ValueError("need at least 2 observations")
    mx = sum(x) / len(x)
    my = sum(y) / len(y)
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("undefined correlation: zero variance")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    return sxy / math.sqrt(sxx * syy)


def rank_features(gold_scores: Mapping[str, float],
                  feature_vectors: Mapping[str, LinguisticFeatureVector],
                  ) -> list[tuple[str, float | None]]:
    """Rank features by |pearson r| against gold scores, strongest first.

    ``gold_scores`` and ``feature_vectors`` are keyed by essay id.  Features
    whose correlation is undefined (zero variance) carry ``None`` and sort
    last.
    """
    ids = sorted(gold_scores)
    if len(ids) < 2:
        raise ValueError("need at least 2 essays")
    missing = [i for i in ids if i not in feature_vectors]
    if missing:
        raise ValueError(f"no feature vector for essay {missing[0]!r}")
    golds = [float(gold_scores[i]) for i in ids]

    ranked: list[tuple[str, float | None]] = []
    for name in FEATURE_NAMES:
        values = [float(getattr(feature_vectors[i], name)) for i in ids]
        try:
            r: float | None = pearson(values, golds)
        except ValueError:
            r = None
        ranked.append((name, r))
    ranked.sort(key=lambda item: (item[1] is None, -abs(item[1] or 0.0)))
    return ranked


def feature_table(essay_ids: Iterable[str],
                  feature_vectors: Mapping[str, LinguisticFeatureVector]) -> str:
    """Render vectors as a TSV table in canonical field order."""
    lines = ["essay_id\t" + "\t".join(FEATURE_NAMES)]
    for essay_id in essay_ids:
        vec = feature_vectors[essay_id]
        lines.append(essay_id + "\t" + "\t".join(str(getattr(vec, n)) for n in FEATURE_NAMES))
    return "\n".join(lines) + "\n"
