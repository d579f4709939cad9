"""Loading of the bundled word-list resources.

All tables are plain UTF-8 text files under ``essayscore/textstats/data``,
one record per line (tab-separated where multi-field), so they can be
inspected or substituted without touching code.
"""
from __future__ import annotations

from functools import lru_cache
from importlib import resources


def _read_text(name: str) -> str:
    return resources.files("essayscore.textstats.data").joinpath(name).read_text("utf-8")


@lru_cache(maxsize=None)
def dale_chall_words() -> frozenset[str]:
    """The familiar-word list; words absent from it count as difficult."""
    words = frozenset(w.strip().lower() for w in _read_text("dale_chall.txt").split() if w.strip())
    if not words:
        raise RuntimeError("Dale-Chall resource missing")
    return words


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    return frozenset(w.strip().lower() for w in _read_text("stopwords.txt").split() if w.strip())


@lru_cache(maxsize=None)
def lemma_exceptions() -> dict[str, str]:
    table = {}
    for line in _read_text("lemma_exceptions.tsv").splitlines():
        line = line.strip()
        if not line:
            continue
        form, lemma = line.split("\t")
        table[form] = lemma
    return table


@lru_cache(maxsize=None)
def pos_lexicon() -> dict[str, str]:
    table = {}
    for line in _read_text("pos_lexicon.tsv").splitlines():
        line = line.strip()
        if not line:
            continue
        word, tag = line.split("\t")
        table[word] = tag
    return table


@lru_cache(maxsize=None)
def abbreviations() -> frozenset[str]:
    return frozenset(w.strip().lower() for w in _read_text("abbreviations.txt").split() if w.strip())
