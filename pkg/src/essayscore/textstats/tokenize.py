"""Deterministic tokenizer, sentence splitter, lemmatizer and coarse tagger.

Everything here is rule- and lexicon-based so that the same text always
produces the same tokens on any platform.  A word token is a maximal run
of letters/digits/apostrophes/hyphens; ASAP-style anonymization markers
(``@CAPS1``, ``@ORGANIZATION1``, ...) are kept as single word tokens.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from . import resources


class Pos(str, Enum):
    NOUN = "NOUN"
    VERB = "VERB"
    ADJ = "ADJ"
    ADV = "ADV"
    PRON = "PRON"
    DET = "DET"
    ADP = "ADP"
    NUM = "NUM"
    PUNCT = "PUNCT"
    OTHER = "OTHER"


@dataclass(frozen=True)
class Token:
    surface: str
    normalized: str
    lemma: str
    pos: Pos
    is_stopword: bool
    is_word: bool
    start: int  # character offset into the source text


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[Token, ...]
    # half-open [start, end) token-index ranges; ordered, non-overlapping,
    # and together covering every token
    sentence_spans: tuple[tuple[int, int], ...]

    @property
    def sentence_count(self) -> int:
        return len(self.sentence_spans)

    def words(self) -> list[Token]:
        return [t for t in self.tokens if t.is_word]


_ANON = r"@[A-Za-z]+\d*"
_WORD = r"[A-Za-z0-9]+(?:['’\-][A-Za-z0-9]+)*"
_TOKEN_RE = re.compile(f"({_ANON})|({_WORD})|(\\S)")

_TERMINAL = frozenset(".!?")
# a new sentence must open with a capitalized/numeric word token (or an
# anonymization marker); quote- or bracket-led sentences merge leftward,
# which keeps every span after the first anchored to at least one word
_SENT_OPENERS = re.compile(r"[A-Z0-9]|@[A-Za-z]")

_VOWELS = frozenset("aeiou")


@lru_cache(maxsize=1)
def _vocab() -> frozenset[str]:
    # guides suffix stripping; any word the bundled resources know about
    return (resources.dale_chall_words()
            | frozenset(resources.pos_lexicon())
            | resources.stopwords())


def _restore(stem: str, vocab: frozenset[str]) -> str:
    """Undo consonant doubling / silent-e dropping after suffix removal."""
    if len(stem) <= 2 and stem + "e" in vocab:
        return stem + "e"
    if stem in vocab:
        return stem
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS \
            and stem[:-1] in vocab:
        return stem[:-1]
    if stem + "e" in vocab:
        return stem + "e"
    return stem


def _lemma(normalized: str) -> str:
    """Lexicon + suffix-rule lemmatizer over a lowercased word.

    Regular ``-s/-es/-ies/-ed/-ing/-er/-est`` endings are stripped; the
    bundled vocabulary guides restoration so that e.g. ``stopped -> stop``,
    ``living -> live`` and ``causes -> cause`` come out right.
    """
    exceptions = resources.lemma_exceptions()
    if normalized in exceptions:
        return exceptions[normalized]
    vocab = _vocab()
    n = normalized

    if len(n) >= 5 and n.endswith("ies"):
        return n[:-3] + "y"
    if len(n) >= 4 and n.endswith("s") and not n.endswith(("ss", "us", "is", "'s")):
        if n[:-1] in vocab:
            return n[:-1]
        if n.endswith("es"):
            if n[:-2] in vocab:
                return n[:-2]
            if n[-3] in "sxz" or n.endswith(("ches", "shes")):
                return n[:-2]
        return n[:-1]
    if len(n) >= 5 and n.endswith("ing"):
        stem = _restore(n[:-3], vocab)
        return stem if len(stem) >= 2 else n
    if len(n) >= 4 and n.endswith("ed"):
        stem = _restore(n[:-2], vocab)
        return stem if len(stem) >= 2 else n
    if len(n) >= 5 and n.endswith("est") and n[:-3] in vocab:
        return n[:-3]
    if len(n) >= 4 and n.endswith("er") and n[:-2] in vocab:
        return n[:-2]
    return n


_NOUN_SUFFIXES = ("tion", "sion", "ment", "ness", "ity", "ance", "ence",
                  "ship", "hood", "ism", "ist", "ology", "graphy", "ty")
_ADJ_SUFFIXES = ("ous", "ful", "less", "able", "ible", "ive", "ish")


def _tag(surface: str, normalized: str, lemma: str) -> Pos:
    """Context-free coarse tag: lexicon first, then suffix heuristics."""
    if surface.startswith("@"):
        return Pos.NOUN  # anonymized names/places stand in for nouns
    if normalized.isdigit():
        return Pos.NUM
    lexicon = resources.pos_lexicon()
    for key in (normalized, lemma):
        tag = lexicon.get(key)
        if tag is not None:
            return Pos(tag)
    if "'" in normalized:
        return Pos.VERB  # unknown contraction, almost always aux-bearing
    if normalized.endswith("ly"):
        return Pos.ADV
    if normalized.endswith(_ADJ_SUFFIXES):
        return Pos.ADJ
    if normalized.endswith(("ing", "ed")):
        return Pos.VERB
    if normalized.endswith(_NOUN_SUFFIXES):
        return Pos.NOUN
    return Pos.NOUN


def tokenize(text: str) -> TokenizedText:
    """Tokenize ``text`` into words/punctuation and sentence spans.

    Sentence boundaries sit after terminal punctuation (``. ! ?``) that is
    followed by whitespace and a capital-ish opener, or by end of text; an
    abbreviation list suppresses boundaries after e.g. ``Mr.``.  Spans cover
    every token, so trailing text without terminal punctuation still forms
    a sentence.
    """
    stop = resources.stopwords()
    abbrev = resources.abbreviations()
    tokens: list[Token] = []
    for m in _TOKEN_RE.finditer(text):
        surface = m.group(0)
        if m.group(1) or m.group(2):
            normalized = surface.lower().replace("’", "'")
            lemma = normalized if m.group(1) else _lemma(normalized)
            pos = _tag(surface, normalized, lemma)
            tokens.append(Token(
                surface=surface,
                normalized=normalized,
                lemma=lemma,
                pos=pos,
                is_stopword=normalized in stop,
                is_word=True,
                start=m.start(),
            ))
        else:
            tokens.append(Token(
                surface=surface,
                normalized=surface,
                lemma=surface,
                pos=Pos.PUNCT,
                is_stopword=False,
                is_word=False,
                start=m.start(),
            ))

    spans: list[tuple[int, int]] = []
    sent_start = 0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.is_word and tok.surface in _TERMINAL:
            # fold an adjacent run of closing punctuation into this sentence
            j = i
            while j + 1 < len(tokens) and not tokens[j + 1].is_word \
                    and tokens[j + 1].start == tokens[j].start + 1:
                j += 1
            prev_word = next((t for t in reversed(tokens[sent_start:i]) if t.is_word), None)
            is_abbrev = (tok.surface == "." and prev_word is not None
                         and prev_word.normalized in abbrev)
            end_of_text = j + 1 >= len(tokens)
            boundary = end_of_text
            if not end_of_text:
                nxt = tokens[j + 1]
                gap = text[tokens[j].start + 1:nxt.start]
                boundary = bool(gap) and gap.isspace() and bool(_SENT_OPENERS.match(nxt.surface))
            if not is_abbrev and boundary:
                spans.append((sent_start, j + 1))
                sent_start = j + 1
            i = j + 1
            continue
        i += 1
    if sent_start < len(tokens):
        spans.append((sent_start, len(tokens)))

    return TokenizedText(tokens=tuple(tokens), sentence_spans=tuple(spans))
