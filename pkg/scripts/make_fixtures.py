#!/usr/bin/env python3
"""Regenerate the tiny synthetic dataset fixtures under tests/fixtures.

The essays are nonsense-but-grammatical sentences drawn from a seeded pool.
Each essay text embeds its id as an ``[#id]`` marker so the echo mock
backend can look up gold scores from inside a rendered prompt.
"""
from __future__ import annotations

import csv
import random
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

OPENERS = [
    "Dear @CAPS1, I think computers are changing our school.",
    "Many people in @LOCATION1 disagree about technology.",
    "My teacher asked us to write about libraries.",
    "Last @DATE1 our class visited the museum.",
    "Some students spend every evening online.",
    "Everyone in my family reads the newspaper.",
]

MIDDLES = [
    "They teach patience and hand-eye coordination to beginners.",
    "Others believe exercise matters more than screens.",
    "A good book can carry you to faraway places.",
    "Writing letters helps people share strong opinions.",
    "The @ORGANIZATION1 collects donations every winter.",
    "Friends who practice together improve quickly.",
    "Nobody wants to waste a sunny afternoon indoors.",
    "Scientists study how habits change over the years.",
]

CLOSERS = [
    "That is why I stand by my opinion.",
    "Please consider both sides before deciding.",
    "In conclusion, balance is the answer.",
    "We should persuade the readers with facts.",
    "Thank you for reading my letter.",
]


def essay_text(rng: random.Random, essay_id: str) -> str:
    parts = [rng.choice(OPENERS)]
    for _ in range(rng.randint(2, 5)):
        parts.append(rng.choice(MIDDLES))
    parts.append(rng.choice(CLOSERS))
    parts.append(f"[#{essay_id}]")
    return " ".join(parts)


def make_asap(rng: random.Random) -> None:
    rows = []
    for i in range(1, 21):  # set 1: scores 1..6
        essay_id = f"f{i:03d}"
        rows.append((essay_id, "1", essay_text(rng, essay_id), (i - 1) % 6 + 1))
    for i in range(21, 41):  # set 2: scores 1..4
        essay_id = f"f{i:03d}"
        rows.append((essay_id, "2", essay_text(rng, essay_id), (i - 1) % 4 + 1))
    with open(FIXTURES / "asap_tiny.tsv", "w", encoding="utf-8", newline="") as f:
        f.write("essay_id\tessay_set\tessay\trater1_domain1\tdomain1_score\n")
        for essay_id, set_id, text, score in rows:
            f.write(f"{essay_id}\t{set_id}\t{text}\t{score}\t{score}\n")


def make_ellipse(rng: random.Random) -> None:
    with open(FIXTURES / "ellipse_tiny.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["text_id", "full_text", "Overall", "Cohesion", "Syntax",
                         "Vocabulary", "Phraseology", "Grammar", "Conventions"])
        for i in range(1, 13):
            essay_id = f"e{i:03d}"
            overall = 1.0 + 0.5 * ((i * 3) % 9)
            traits = [1.0 + 0.5 * ((i * 3 + j) % 9) for j in range(1, 7)]
            writer.writerow([essay_id, essay_text(rng, essay_id), f"{overall:g}",
                             *[f"{t:g}" for t in traits]])


if __name__ == "__main__":
    rng = random.Random(20240601)
    make_asap(rng)
    make_ellipse(rng)
    print("fixtures regenerated under", FIXTURES)
