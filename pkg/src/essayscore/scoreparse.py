"""Recover structured scores from free-form model output.

A deterministic extractor runs first: it finds a ``Score`` block (tolerant
of ``### Score:``, ``**Score**`` and bare ``Score:`` headers), then one
``- <Trait>: <number>`` line per expected trait, allowing trailing prose
after the number.  Only when that fails does the few-shot JSON-conversion
fallback burn an LLM call.  ``parse`` never raises; every input maps to a
ParsedScore or a ParseFailure.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .corpus import EssaySetMeta
from .llm import LlmClient, LlmError, LlmRequest
from .promptkit import build_parsing_prompt


class FailureReason(str, Enum):
    NO_SCORE_FOUND = "no_score_found"
    NON_NUMERIC = "non_numeric"
    INVALID_JSON = "invalid_json"
    TRAIT_MISMATCH = "trait_mismatch"
    LLM_ERROR = "llm_error"


@dataclass(frozen=True)
class ParsedScore:
    scores: Mapping[str, float]
    raw: str
    source: str  # "deterministic" | "llm_fallback"
    explanation: str | None = None
    feedback: str | None = None
    clamped_traits: tuple[str, ...] = ()
    # traits present in the output but not declared by the essay set; kept
    # for audit, excluded from evaluation
    extra_scores: Mapping[str, float] = field(default_factory=dict)

    @property
    def clamped(self) -> bool:
        return bool(self.clamped_traits)

    def raw_digest(self) -> str:
        return hashlib.sha256(self.raw.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ParseFailure:
    reason: FailureReason
    detail: str
    raw: str

    def raw_digest(self) -> str:
        return hashlib.sha256(self.raw.encode("utf-8")).hexdigest()


_SCORE_HEADER = re.compile(
    r"^[ \t>]*(?:#{1,6}[ \t]*)?\**[ \t]*scores?[ \t]*\**[ \t]*:?[ \t]*$"
    r"|^[ \t>]*(?:#{1,6}[ \t]*)?\**[ \t]*scores?[ \t]*\**[ \t]*:",
    re.IGNORECASE | re.MULTILINE)

_SECTION_HEADER = re.compile(
    r"^[ \t>]*(?:#{1,6}[ \t]*)?\**[ \t]*(explanation|feedbacks?|score)s?[ \t]*\**[ \t]*:",
    re.IGNORECASE | re.MULTILINE)

_NUMBER = r"(-?\d+(?:\.\d+)?)"


def _find_trait_value(block: str, trait: str) -> float | None | str:
    """Value for one trait inside a score block.

    Returns the number, None when the trait line is absent, or the string
    "non_numeric" when the line exists but carries no parseable number.
    """
    pattern = re.compile(
        r"^[ \t>]*(?:[-*+•][ \t]*)?\**[ \t]*"
        + r"[ \t]+".join(re.escape(part) for part in trait.split())
        + r"[ \t]*\**[ \t]*:[ \t]*(.*)$",
        re.IGNORECASE | re.MULTILINE)
    m = pattern.search(block)
    if m is None:
        return None
    tail = m.group(1)
    num = re.match(r"[*_ \t]*" + _NUMBER, tail)
    if num is None:
        return "non_numeric"
    return float(num.group(1))


def _extract_section(raw: str, names: tuple[str, ...]) -> str | None:
    pattern = re.compile(
        r"^[ \t>]*(?:#{1,6}[ \t]*)?\**[ \t]*(?:" + "|".join(names) + r")[ \t]*\**[ \t]*:[ \t]*",
        re.IGNORECASE | re.MULTILINE)
    m = pattern.search(raw)
    if m is None:
        return None
    rest = raw[m.end():]
    nxt = _SECTION_HEADER.search(rest)
    text = rest[: nxt.start()] if nxt else rest
    text = text.strip()
    return text or None


def _finalize(values: dict[str, float], meta: EssaySetMeta, raw: str, source: str,
              explanation: str | None, feedback: str | None) -> ParsedScore:
    """Canonicalize trait names, snap to the score grid and clamp to range."""
    canon = {" ".join(t.lower().split()): t for t in meta.trait_names}
    scores: dict[str, float] = {}
    extra: dict[str, float] = {}
    clamped: list[str] = []
    for name, value in values.items():
        key = " ".join(str(name).lower().split())
        if key in canon:
            trait = canon[key]
            snapped = meta.snap_to_grid(value)
            if not meta.in_range(value):
                clamped.append(trait)
            scores[trait] = snapped
        else:
            extra[str(name)] = value
    return ParsedScore(scores=scores, raw=raw, source=source,
                       explanation=explanation, feedback=feedback,
                       clamped_traits=tuple(clamped), extra_scores=extra)


def parse_deterministic(raw: str, meta: EssaySetMeta) -> ParsedScore | ParseFailure:
    """Regex extraction of the expected traits from a Score block."""
    headers = list(_SCORE_HEADER.finditer(raw))
    if not headers:
        return ParseFailure(FailureReason.NO_SCORE_FOUND,
                            "no Score block in output", raw)
    saw_non_numeric = False
    # models sometimes echo the requested skeleton first; the last block
    # that yields values wins
    for header in reversed(headers):
        block = raw[header.end():]
        values: dict[str, float] = {}
        for trait in meta.trait_names:
            got = _find_trait_value(block, trait)
            if got == "non_numeric":
                saw_non_numeric = True
            elif isinstance(got, float):
                values[trait] = got
        if not values and len(meta.trait_names) == 1:
            # single-trait sets may put the number right on the header line
            line_end = raw.find("\n", header.start())
            line = raw[header.start(): line_end if line_end != -1 else len(raw)]
            m = re.search(r":[ \t]*\**[ \t]*" + _NUMBER, line)
            if m:
                values[meta.trait_names[0]] = float(m.group(1))
        if values:
            explanation = _extract_section(raw, ("explanation",))
            feedback = _extract_section(raw, ("feedbacks", "feedback"))
            return _finalize(values, meta, raw, "deterministic", explanation, feedback)
    if saw_non_numeric:
        return ParseFailure(FailureReason.NON_NUMERIC,
                            "trait line present but no parseable number", raw)
    return ParseFailure(FailureReason.TRAIT_MISMATCH,
                        f"Score block lacks expected trait(s) {list(meta.trait_names)}", raw)


_FENCE = re.compile(r"^```[a-zA-Z0-9]*\s*\n?|\n?```\s*$")


def _strip_fences(text: str) -> str:
    text = text.strip()
    text = _FENCE.sub("", text)
    return text.strip()


def _repair_json(text: str) -> str | None:
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end == -1 or end <= start:
        return None
    return text[start:end + 1]


def _coerce_number(value) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value.strip())
        except ValueError:
            return None
    return None


def parse_with_llm(raw: str, meta: EssaySetMeta, client: LlmClient,
                   model: str) -> ParsedScore | ParseFailure:
    """Few-shot JSON conversion of ``raw`` via a stand-alone LLM call."""
    if not raw.strip():
        return ParseFailure(FailureReason.NO_SCORE_FOUND, "empty raw output", raw)
    try:
        reply = client.complete(LlmRequest(model=model, prompt=build_parsing_prompt(raw)))
    except LlmError as exc:
        return ParseFailure(FailureReason.LLM_ERROR, str(exc), raw)
    candidate = _strip_fences(reply.text)
    payload = None
    for attempt in (candidate, _repair_json(candidate)):
        if attempt is None:
            continue
        try:
            payload = json.loads(attempt)
            break
        except json.JSONDecodeError:
            continue
    if not isinstance(payload, dict):
        return ParseFailure(FailureReason.INVALID_JSON,
                            "fallback reply is not valid JSON", raw)
    score_obj = payload.get("Score")
    if not isinstance(score_obj, dict) or not score_obj:
        return ParseFailure(FailureReason.INVALID_JSON,
                            "fallback JSON lacks a Score object", raw)
    values: dict[str, float] = {}
    for name, value in score_obj.items():
        num = _coerce_number(value)
        if num is None:
            return ParseFailure(FailureReason.NON_NUMERIC,
                                f"Score entry {name!r} is not numeric", raw)
        values[name] = num
    explanation = payload.get("Explanation")
    feedback = payload.get("Feedbacks", payload.get("Feedback"))
    parsed = _finalize(values, meta, raw, "llm_fallback",
                       explanation if isinstance(explanation, str) else None,
                       feedback if isinstance(feedback, str) else None)
    if not parsed.scores:
        return ParseFailure(FailureReason.TRAIT_MISMATCH,
                            f"fallback JSON has no expected trait, got {list(values)}", raw)
    return parsed


def parse(raw: str, meta: EssaySetMeta, client: LlmClient | None = None,
          model: str = "", mode: str = "hybrid") -> ParsedScore | ParseFailure:
    """Deterministic extraction first, LLM fallback second.

    ``mode="llm_only"`` skips the deterministic path entirely, matching the
    always-LLM behavior of the original pipeline.  Never raises.
    """
    if mode not in ("hybrid", "llm_only"):
        raise ValueError(f"unknown parse mode {mode!r}")
    try:
        if mode == "hybrid":
            result = parse_deterministic(raw, meta)
            if isinstance(result, ParsedScore) and result.scores:
                return result
            if client is None:
                return result
        if client is None:
            return ParseFailure(FailureReason.LLM_ERROR,
                                "llm_only mode without a configured client", raw)
        return parse_with_llm(raw, meta, client, model)
    except Exception as exc:  # never propagate: contract is total
        return ParseFailure(FailureReason.LLM_ERROR,
                            f"unexpected {exc.__class__.__name__}: {exc}", raw)


def parsed_record(essay_id: str, outcome: ParsedScore | ParseFailure) -> dict:
    """JSON-lines record for one essay's parse outcome."""
    if isinstance(outcome, ParsedScore):
        record = {
            "essay_id": essay_id,
            "scores": dict(outcome.scores),
            "source": outcome.source,
            "clamped": list(outcome.clamped_traits),
            "raw_digest": outcome.raw_digest(),
        }
        if outcome.explanation:
            record["explanation"] = outcome.explanation
        if outcome.feedback:
            record["feedback"] = outcome.feedback
        if outcome.extra_scores:
            record["extra_scores"] = dict(outcome.extra_scores)
        return record
    return {
        "essay_id": essay_id,
        "failure": outcome.reason.value,
        "detail": outcome.detail,
        "raw_digest": outcome.raw_digest(),
    }
