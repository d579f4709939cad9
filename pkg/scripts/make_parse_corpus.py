#!/usr/bin/env python3
"""Regenerate the 200-sample parser corpus at tests/fixtures/parse_corpus.jsonl.

Each record holds one synthetic model output (``raw``), the essay-set
shape it answers (``meta``: overall16 or walc), the expected parse result,
and -- for the mangled samples -- the canned reply the JSON-conversion
fallback should return when asked to repair it.  180 records are
well-formed variants of the score block; 20 are mangled, of which 8 are
recoverable through the fallback, leaving 12 end-to-end failures (6%).
"""
from __future__ import annotations

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "parse_corpus.jsonl"

WORKED_EXAMPLES = [
    {
        "id": "p001",
        "meta": "overall16",
        "raw": ("### Explanation: The student's essay demonstrates a limited understanding "
                "of the topic and a lack of cohesion. The essay jumps from one idea to "
                "another without a clear connection between them. The writing is also "
                "filled with numerous grammatical errors, misspellings, and inconsistent "
                "capitalization.\n### Score:\n- Overall: 1 The essay demonstrates a very "
                "limited understanding of the topic and contains numerous errors in "
                "grammar, spelling, and capitalization. The writing lacks cohesion and a "
                "clear thesis statement, and the arguments are not well-supported with "
                "evidence or examples."),
        "expected": {"scores": {"Overall": 1.0}},
    },
    {
        "id": "p002",
        "meta": "walc",
        "raw": ("### Explanation: The student's essay demonstrates a basic understanding "
                "of the topic and presents a clear position, but the writing is "
                "disorganized and contains numerous errors in language conventions. The "
                "essay jumps between discussing censorship in libraries and specific "
                "examples of offensive music, making it difficult to follow the main "
                "argument.\n### Score:\n- Writing Applications: 2 The essay presents a "
                "viewpoint on the issue of censorship, but the argument is not "
                "well-developed or clearly stated. The student uses personal experiences "
                "and examples.\n- Language Conventions: 1 The essay contains numerous "
                "errors in language conventions, including incorrect capitalization, "
                "punctuation, and sentence structure."),
        "expected": {"scores": {"Writing Applications": 2.0, "Language Conventions": 1.0}},
    },
    {
        "id": "p003",
        "meta": "overall16",
        "raw": ("### Explanation: The student's essay demonstrates a moderate level of "
                "awareness of the audience, as they address the readers directly and use "
                "a conversational tone.\n### Feedbacks: the essay could have been more "
                "effective if the student had used more formal language and addressed "
                "specific concerns of the local community regarding the overuse of "
                "computers.\n### Score:\n- Overall: 3 The student's essay shows some "
                "awareness of the audience, but there is room for improvement in terms "
                "of language and organization. The essay could benefit from more "
                "specific examples and a clearer, more focused argument."),
        "expected": {"scores": {"Overall": 3.0}},
    },
]

EXPLANATIONS = [
    "The essay presents a clear argument supported by two concrete examples.",
    "Organization is weak and several sentences run together.",
    "Vocabulary is varied although the conclusion merely restates the opening.",
    "The writer addresses the audience directly and keeps a consistent tone.",
    "Transitions are abrupt and the evidence is anecdotal at best.",
    "Spelling is mostly accurate; punctuation errors distract in places.",
    "The response stays on topic and develops each point in turn.",
    "Ideas are listed rather than developed, with little elaboration.",
]

TRAILERS = [
    "",
    " The grade reflects both content and conventions.",
    " Minor errors kept this from the next band.",
    " A stronger conclusion would raise the score.",
]


def well_formed(rng: random.Random, idx: int) -> dict:
    essay_id = f"p{idx:03d}"
    expl = rng.choice(EXPLANATIONS)
    variant = idx % 12
    if variant in (0, 1, 2):  # canonical shape
        k = rng.randint(1, 6)
        raw = (f"### Explanation: {expl} (case {essay_id})\n### Score:\n"
               f"- Overall: {k}{rng.choice(TRAILERS)}")
        return {"id": essay_id, "meta": "overall16", "raw": raw,
                "expected": {"scores": {"Overall": float(k)}}}
    if variant == 3:  # bare Score: header
        k = rng.randint(1, 6)
        raw = f"Explanation: {expl} (case {essay_id})\nScore:\n- Overall: {k}"
        return {"id": essay_id, "meta": "overall16", "raw": raw,
                "expected": {"scores": {"Overall": float(k)}}}
    if variant == 4:  # markdown bold header and value
        k = rng.randint(1, 6)
        raw = (f"**Explanation**: {expl} (case {essay_id})\n**Score**:\n"
               f"- **Overall**: **{k}**")
        return {"id": essay_id, "meta": "overall16", "raw": raw,
                "expected": {"scores": {"Overall": float(k)}}}
    if variant == 5:  # leading chatter
        k = rng.randint(1, 6)
        raw = (f"Sure! Here is my analysis. (case {essay_id})\n\n"
               f"### Explanation: {expl}\n### Score:\n- Overall: {k}")
        return {"id": essay_id, "meta": "overall16", "raw": raw,
                "expected": {"scores": {"Overall": float(k)}}}
    if variant == 6:  # number on the header line
        k = rng.randint(1, 6)
        raw = f"### Explanation: {expl} (case {essay_id})\n### Score: {k}"
        return {"id": essay_id, "meta": "overall16", "raw": raw,
                "expected": {"scores": {"Overall": float(k)}}}
    if variant == 7:  # decimal value
        k = rng.randint(1, 6)
        raw = f"### Explanation: {expl} (case {essay_id})\n### Score:\n- Overall: {k}.0"
        return {"id": essay_id, "meta": "overall16", "raw": raw,
                "expected": {"scores": {"Overall": float(k)}}}
    if variant == 8:  # lowercase headers
        k = rng.randint(1, 6)
        raw = f"explanation: {expl} (case {essay_id})\nscore:\n- overall: {k}"
        return {"id": essay_id, "meta": "overall16", "raw": raw,
                "expected": {"scores": {"Overall": float(k)}}}
    if variant == 9:  # echoed empty skeleton before the real block
        k = rng.randint(1, 6)
        raw = (f"### Explanation:\n### Score:\n- Overall:\n\n"
               f"### Explanation: {expl} (case {essay_id})\n### Score:\n- Overall: {k}")
        return {"id": essay_id, "meta": "overall16", "raw": raw,
                "expected": {"scores": {"Overall": float(k)}}}
    if variant == 10:  # two-trait set
        wa = rng.randint(1, 6)
        lc = rng.randint(1, 4)
        raw = (f"### Explanation: {expl} (case {essay_id})\n### Score:\n"
               f"- Writing Applications: {wa} solid reasoning\n"
               f"- Language Conventions: {lc}")
        return {"id": essay_id, "meta": "walc", "raw": raw,
                "expected": {"scores": {"Writing Applications": float(wa),
                                        "Language Conventions": float(lc)}}}
    # variant 11: out-of-range value, clamped on parse
    k = rng.choice([0, 7, 9])
    clamped = 1.0 if k < 1 else 6.0
    raw = f"### Explanation: {expl} (case {essay_id})\n### Score:\n- Overall: {k}"
    return {"id": essay_id, "meta": "overall16", "raw": raw,
            "expected": {"scores": {"Overall": clamped}, "clamped": ["Overall"]}}


RECOVERABLE_REPLIES = [
    '{"Score": {"Overall": 4}, "Explanation": "Recovered from prose."}',
    '```json\n{"Score": {"Overall": 2}}\n```',
    'Here is the JSON you asked for: {"Score": {"Overall": 5}}',
    '{"Score": {"Overall": "3"}, "Feedbacks": "could be tighter"}',
    '{"Score": {"Writing Applications": 3, "Language Conventions": 2}}',
    '```\n{"Score": {"Overall": 1}, "Explanation": "barely on topic"}\n```',
    '{"Score": {"Overall": 6}}',
    '{"Score": {"Overall": 2.0}, "Explanation": "weak transitions"}',
]

UNRECOVERABLE_REPLIES = [
    "Sorry, I can only help with weather questions.",
    "",
    '{"Score": broken json here',
    '{"Overall": 3}',
    '{"Score": 4}',
    "The input seems incomplete, please resend it.",
    "NULL",
    '{"Score": {}}',
    "I could not find any score in that text.",
    "[1, 2, 3]",
    '{"Score": {"Overall": "high"}}',
    "score score score",
]

MANGLED_TEXTS = [
    "I cannot grade this essay. (case {id})",
    "The essay was too short to assess. (case {id})",
    "As an AI model I must decline. (case {id})",
    "No score can be assigned here. (case {id})",
    "### Explanation: The response trails off before any verdict. (case {id})",
    "### Explanation: Grading unavailable. (case {id})",
    "### Score:\n- Overall: excellent (case {id})",
    "### Score:\n- Overall: strong effort (case {id})",
    "### Score:\n- Cohesion: 4 (case {id})",
    "### Score:\n- Vocabulary: 2 (case {id})",
    "{{'overall': }} (case {id})",
    "grade pending review (case {id})",
    "The rubric does not apply. (case {id})",
    "[system error while grading] (case {id})",
    "### Analysis ended unexpectedly (case {id})",
    "Refusing: prompt looked unsafe. (case {id})",
    "... (case {id})",
    "Overall performance was adequate. (case {id})",
    "Score unavailable for case {id}",
    "Try again later. (case {id})",
]


def main() -> None:
    rng = random.Random(20240607)
    records = list(WORKED_EXAMPLES)
    idx = len(records) + 1
    while len(records) < 180:
        records.append(well_formed(rng, idx))
        idx += 1

    assert len(MANGLED_TEXTS) == 20
    recoverable = set(rng.sample(range(20), 8))
    good_iter = iter(RECOVERABLE_REPLIES)
    bad_iter = iter(UNRECOVERABLE_REPLIES)
    for j, template in enumerate(MANGLED_TEXTS):
        essay_id = f"p{idx:03d}"
        idx += 1
        raw = template.format(id=essay_id)
        if j in recoverable:
            reply = next(good_iter)
            scores = json.loads(reply.strip("`\n ").removeprefix("json\n")
                                if reply.startswith("```") else
                                reply[reply.find("{"):reply.rfind("}") + 1])["Score"]
            meta = "walc" if "Writing Applications" in scores else "overall16"
            expected = {"scores": {k: float(v) for k, v in scores.items()},
                        "source": "llm_fallback"}
            records.append({"id": essay_id, "meta": meta, "raw": raw,
                            "expected": expected, "fallback_reply": reply})
        else:
            records.append({"id": essay_id, "meta": "overall16", "raw": raw,
                            "expected": {"failure": True},
                            "fallback_reply": next(bad_iter)})

    assert len(records) == 200
    failures = sum(1 for r in records if r["expected"].get("failure"))
    with open(OUT, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"{len(records)} records ({failures} designed failures, "
          f"{failures / len(records):.1%}) -> {OUT}")


if __name__ == "__main__":
    main()
