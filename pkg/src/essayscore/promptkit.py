"""Byte-exact assembly of the scoring prompt and the JSON-conversion prompt.

The scoring prompt has six sections (persona, essay prompt, analysis task,
student essay, optional additional information, analysis/format) rendered
in fixed order, separated by exactly one blank line, with ``\\n`` endings
and no trailing whitespace.  Golden tests pin the rendered bytes, so any
wording change here is a contract change.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import EssaySetMeta
from .textstats import FEATURE_NAMES, LinguisticFeatureVector

DEFAULT_PERSONA = (
    "You are part of an educational research team analyzing the writing "
    "skills of students in grades 7 to 10. You have been given a student's "
    "essay and the prompt they responded to."
)

ADDITIONAL_INFO_PREAMBLE = (
    "Studies show that the following features are highly, positively "
    "correlated with the grade of the essay (i.e., higher features "
    "typically means higher end score)"
)

ANALYSIS_PREAMBLE = (
    "Conclude your analysis with a grade and comments in the following format:"
)

TASK_REQUIREMENTS_PREAMBLE = "Grade the given essay with the following requirements:"
EXPLANATION_REQUIREMENT = "- Provide an explanation for your score as well."

# one fixed description per feature keeps prompt text and extraction in sync
FEATURE_DESCRIPTIONS: Mapping[str, str] = {
    "unique_word_count": "total number of unique words in the essay",
    "word_count": "total number of words in the essay.",
    "sentence_count": "total number of sentences present",
    "essay_char_length": "total number of characters",
    "lemma_count": "total number of lemma",
    "noun_count": "total number of nouns",
    "stopword_count": "total number of stopwords",
    "dale_chall_difficult_count": (
        "total number of words that are not in the Dale-Chall word list of "
        "3000 words recognized by 80% of fifth graders"),
    "total_char_count": "total number of characters",
    "long_word_count": "total number of long words (7 or more characters)",
}

SELECTION_FIELDS: Mapping[str, tuple[str, ...]] = {
    "none": (),
    "unique_word": ("unique_word_count",),
    "top3": ("unique_word_count", "lemma_count", "dale_chall_difficult_count"),
    "top10": FEATURE_NAMES,
}


@dataclass(frozen=True)
class FeatureSelection:
    """Which features enter the prompt.

    ``kind`` is a preset name, ``computed`` (top-k of a measured
    correlation ranking) or ``fields`` (an explicit list, e.g. to swap the
    long-word count into the top-3 slot).
    """
    kind: str
    k: int | None = None
    fields: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in (*SELECTION_FIELDS, "computed", "fields"):
            raise ValueError(f"unknown feature selection {self.kind!r}")
        if self.kind == "computed" and (self.k is None or self.k < 1):
            raise ValueError("computed selection needs k >= 1")
        if self.kind == "fields":
            unknown = [f for f in self.fields if f not in FEATURE_NAMES]
            if unknown or not self.fields:
                raise ValueError(f"unknown feature field(s) {unknown or 'none given'}")

    @classmethod
    def parse(cls, spec: str) -> "FeatureSelection":
        if spec.startswith("computed:"):
            return cls("computed", k=int(spec.split(":", 1)[1]))
        if spec.startswith("fields:"):
            names = tuple(n.strip() for n in spec.split(":", 1)[1].split(",") if n.strip())
            return cls("fields", fields=names)
        return cls(spec)

    def field_names(self, ranking: Sequence[tuple[str, float | None]] | None = None,
                    ) -> tuple[str, ...]:
        """Resolve to canonical-order field names.

        ``computed`` selections take the top-k of a measured correlation
        ranking (see :func:`essayscore.textstats.rank_features`), reordered
        canonically.
        """
        if self.kind == "fields":
            return tuple(n for n in FEATURE_NAMES if n in self.fields)
        if self.kind != "computed":
            return SELECTION_FIELDS[self.kind]
        if ranking is None:
            raise ValueError("computed selection requires a feature ranking")
        chosen = {name for name, _ in ranking[: self.k]}
        return tuple(n for n in FEATURE_NAMES if n in chosen)


@dataclass(frozen=True)
class FeatureBlock:
    """Ordered (description, value) lines of the additional-info section."""
    entries: tuple[tuple[str, int], ...]

    @classmethod
    def from_vector(cls, vector: LinguisticFeatureVector,
                    selection: FeatureSelection,
                    ranking: Sequence[tuple[str, float | None]] | None = None,
                    ) -> "FeatureBlock | None":
        names = selection.field_names(ranking)
        if not names:
            return None
        return cls(entries=tuple(
            (FEATURE_DESCRIPTIONS[n], getattr(vector, n)) for n in names))

    def render(self) -> str:
        return "\n".join(f"- {desc}: {value}" for desc, value in self.entries)


@dataclass(frozen=True)
class ScoringPromptSpec:
    persona: str
    essay_prompt: str
    analysis_instruction: str
    essay_text: str
    format_instruction: str
    additional_info: FeatureBlock | None = None

    def __post_init__(self) -> None:
        for name in ("persona", "analysis_instruction", "format_instruction"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")


def score_range_lines(meta: EssaySetMeta) -> list[str]:
    """One ``- <Trait>: from <min> to <max>.`` line per trait; the first
    carries the ``Use those score ranges:`` preamble."""
    lines = []
    for i, trait in enumerate(meta.trait_names):
        lo, hi = meta.trait_range(trait)
        prefix = "- Use those score ranges: " if i == 0 else "- "
        lines.append(f"{prefix}{trait}: from {lo} to {hi}.")
    return lines


def score_skeleton_lines(meta: EssaySetMeta) -> list[str]:
    return ["### Explanation:", "### Score:"] + [f"- {t}:" for t in meta.trait_names]


def build_format_instruction(meta: EssaySetMeta) -> str:
    """Score-range requirements, the explanation requirement, and the
    closing answer skeleton, one line each."""
    return "\n".join(
        score_range_lines(meta) + [EXPLANATION_REQUIREMENT] + score_skeleton_lines(meta))


def default_scoring_spec(meta: EssaySetMeta,
                         essay_text: str,
                         additional_info: FeatureBlock | None = None,
                         persona: str = DEFAULT_PERSONA,
                         overrides: Mapping[str, str] | None = None,
                         ) -> ScoringPromptSpec:
    """Spec for one essay; ``overrides`` replaces individual section strings
    (``persona``, ``essay_prompt``, ``analysis_instruction``,
    ``format_instruction``) for template experiments."""
    overrides = dict(overrides or {})
    unknown = set(overrides) - {"persona", "essay_prompt",
                                "analysis_instruction", "format_instruction"}
    if unknown:
        raise ValueError(f"unknown prompt override(s): {sorted(unknown)}")
    analysis_instruction = "\n".join(
        [TASK_REQUIREMENTS_PREAMBLE] + score_range_lines(meta) + [EXPLANATION_REQUIREMENT])
    return ScoringPromptSpec(
        persona=overrides.get("persona", persona),
        essay_prompt=overrides.get("essay_prompt", meta.prompt_text),
        analysis_instruction=overrides.get("analysis_instruction", analysis_instruction),
        essay_text=essay_text,
        format_instruction=overrides.get("format_instruction",
                                         "\n".join(score_skeleton_lines(meta))),
        additional_info=additional_info,
    )


def build_scoring_prompt(spec: ScoringPromptSpec) -> str:
    """Render the six sections; the essay text is embedded verbatim."""
    sections = [
        spec.persona,
        f"### Essay Prompt: {spec.essay_prompt}",
        f"### Analysis Task: {spec.analysis_instruction}",
        f"### Analyzed Student Essay: {spec.essay_text}",
    ]
    if spec.additional_info is not None:
        sections.append(
            f"### Additional Information: {ADDITIONAL_INFO_PREAMBLE}\n"
            + spec.additional_info.render())
    sections.append(f"### Analysis: {ANALYSIS_PREAMBLE}\n{spec.format_instruction}")
    return "\n\n".join(sections)


_PARSING_PROMPT_PREFIX = """You are an AI agent that specialized in converting text input into JSON format.
Instruction:
- Input: text with one or more score and some other relevant information (e.g., explanation, feedbacks, etc.)
- Output: JSON text with 'Score' as a mandatory key and other information organized by their field names
- Make sure ONLY return the VALID JSON data, without any additional text or characters.
Here are some examples

Example Input:
### Explanation: The student's essay demonstrates a limited understanding of the topic and a lack of cohesion. The essay jumps from one idea to another without a clear connection between them. The writing is also filled with numerous grammatical errors, misspellings, and inconsistent capitalization.
### Score:
- Overall: 1 The essay demonstrates a very limited understanding of the topic and contains numerous errors in grammar, spelling, and capitalization. The writing lacks cohesion and a clear thesis statement, and the arguments are not well-supported with evidence or examples.
Example Output:
{
    "Score": {
        "Overall": 1
    },
    "Explanation": "The student's essay demonstrates a limited understanding of the topic and a lack of cohesion. The essay jumps from one idea to another without a clear connection between them. The writing is also filled with numerous grammatical errors, misspellings, and inconsistent capitalization."
}

Example Input:
### Explanation: The student's essay demonstrates a basic understanding of the topic and presents a clear position, but the writing is disorganized and contains numerous errors in language conventions. The essay jumps between discussing censorship in libraries and specific examples of offensive music, making it difficult to follow the main argument.
### Score:
- Writing Applications: 2 The essay presents a viewpoint on the issue of censorship, but the argument is not well-developed or clearly stated. The student uses personal experiences and examples.
- Language Conventions: 1 The essay contains numerous errors in language conventions, including incorrect capitalization, punctuation, and sentence structure.
Example Output:
{
    "Score": {
        "Writing Applications": 2,
        "Language Conventions": 1
    }
    "Explanation": "The student's essay demonstrates a basic understanding of the topic and presents a clear position, but the writing is disorganized and contains numerous errors in language conventions. The essay jumps between discussing censorship in libraries and specific examples of offensive music, making it difficult to follow the main argument."
}

Example Input:
### Explanation: The student's essay demonstrates a moderate level of awareness of the audience, as they address the readers directly and use a conversational tone.
### Feedbacks: the essay could have been more effective if the student had used more formal language and addressed specific concerns of the local community regarding the overuse of computers.
### Score:
- Overall: 3 The student's essay shows some awareness of the audience, but there is room for improvement in terms of language and organization. The essay could benefit from more specific examples and a clearer, more focused argument.
Example Output:
{
    "Score": {
        "Overall": 3
    },
    "Explanation": "The student's essay demonstrates a moderate level of awareness of the audience, as they address the readers directly and use a conversational tone.",
    "Feedbacks": "the essay could have been more effective if the student had used more formal language and addressed specific concerns of the local community regarding the overuse of computers."
}

Now work on the following input:
Input:
"""

_PARSING_PROMPT_SUFFIX = """
Output:"""


def build_parsing_prompt(raw_output: str) -> str:
    """Few-shot JSON-conversion prompt with ``raw_output`` in the input slot.

    Substitution is positional, so payloads containing the literal template
    placeholder pass through untouched.
    """
    if not raw_output:
        raise ValueError("raw_output must be non-empty")
    return _PARSING_PROMPT_PREFIX + raw_output + _PARSING_PROMPT_SUFFIX
