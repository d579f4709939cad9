"""Quadratic Weighted Kappa and per-set evaluation reports.

QWK follows the Kaggle ASAP convention: with observed count matrix O,
weights w[i,j] = (i-j)^2/(N-1)^2 and expected matrix E the outer product
of the two marginal histograms normalized to O's total,

    kappa = 1 - sum(w*O) / sum(w*E).

Sums are taken with ``math.fsum`` so the result is independent of summation
order, which makes the predicted/gold symmetry exact in floating point.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Essay, EssaySetMeta
from .scoreparse import ParsedScore, ParseFailure


@dataclass(frozen=True)
class RatingPair:
    essay_id: str
    predicted: int
    gold: int


def to_bins(score: float, meta: EssaySetMeta) -> int:
    """Map a grid score to its integer bin: (score - min)/step."""
    k = (score - meta.score_min) / meta.score_step
    if abs(k - round(k)) > 1e-9:
        raise ValueError(
            f"score {score} is not on the {meta.score_step:g} grid of "
            f"set {meta.essay_set_id!r}")
    b = int(round(k))
    if not 0 <= b < meta.num_bins:
        raise ValueError(f"score {score} outside [{meta.score_min}, {meta.score_max}]")
    return b


def qwk(pairs: Iterable[RatingPair | tuple[int, int]], num_bins: int) -> float:
    """Quadratic weighted kappa over (predicted, gold) bin pairs."""
    if num_bins < 2:
        raise ValueError("num_bins must be >= 2")
    preds = []
    golds = []
    for p in pairs:
        if isinstance(p, RatingPair):
            a, b = p.predicted, p.gold
        else:
            a, b = p
        preds.append(a)
        golds.append(b)
    if not preds:
        raise ValueError("no rating pairs")
    preds_arr = np.asarray(preds, dtype=np.intp)
    golds_arr = np.asarray(golds, dtype=np.intp)
    if preds_arr.min() < 0 or preds_arr.max() >= num_bins \
            or golds_arr.min() < 0 or golds_arr.max() >= num_bins:
        raise ValueError(f"bin outside [0, {num_bins})")

    observed = np.zeros((num_bins, num_bins), dtype=np.int64)
    np.add.at(observed, (preds_arr, golds_arr), 1)
    hist_pred = np.bincount(preds_arr, minlength=num_bins).astype(np.float64)
    hist_gold = np.bincount(golds_arr, minlength=num_bins).astype(np.float64)
    expected = np.outer(hist_pred, hist_gold) / len(preds)

    idx = np.arange(num_bins, dtype=np.float64)
    weights = (idx[:, None] - idx[None, :]) ** 2 / (num_bins - 1) ** 2

    numerator = math.fsum((weights * observed).ravel().tolist())
    denominator = math.fsum((weights * expected).ravel().tolist())
    if denominator == 0.0:
        # both marginals sit on one identical bin; O is then diagonal
        if numerator == 0.0:
            return 1.0
        raise ValueError("degenerate marginals")
    return 1.0 - numerator / denominator


@dataclass
class SetReport:
    qwk: float | None
    n: int
    parse_failures: int
    clamped: int


@dataclass
class EvaluationReport:
    per_set: dict[str, SetReport]
    average_qwk: float | None
    config_digest: str = ""
    warnings: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "per_set": {
                set_id: {"qwk": r.qwk, "n": r.n,
                         "parse_failures": r.parse_failures, "clamped": r.clamped}
                for set_id, r in sorted(self.per_set.items())
            },
            "average_qwk": self.average_qwk,
            "config_digest": self.config_digest,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True,
                          ensure_ascii=False) + "\n"

    def render_text(self) -> str:
        lines = [f"{'set':>8s}  {'qwk':>9s}  {'n':>6s}  {'failures':>8s}  {'clamped':>7s}"]
        for set_id, r in sorted(self.per_set.items()):
            q = f"{r.qwk:.3f}" if r.qwk is not None else "undef"
            lines.append(f"{set_id:>8s}  {q:>9s}  {r.n:>6d}  {r.parse_failures:>8d}  {r.clamped:>7d}")
        avg = f"{self.average_qwk:.3f}" if self.average_qwk is not None else "undef"
        lines.append(f"{'Avg.':>8s}  {avg:>9s}")
        for w in self.warnings:
            lines.append(f"warning: {w}")
        if self.config_digest:
            lines.append(f"config: {self.config_digest}")
        return "\n".join(lines) + "\n"


def primary_trait(meta: EssaySetMeta) -> str:
    """The trait evaluated against gold_overall (the set's first trait)."""
    return meta.trait_names[0]


def build_report(parsed: Mapping[str, ParsedScore | ParseFailure],
                 essays: Sequence[Essay],
                 metas: Mapping[str, EssaySetMeta],
                 config_digest: str = "") -> EvaluationReport:
    """Per-set QWK over successfully parsed essays, failures tallied.

    Essays with a ParseFailure are excluded from the QWK computation and
    counted, rather than imputed; the per-set ``n`` makes the exclusion
    visible.  The average is the unweighted mean over sets with a defined
    QWK.
    """
    by_id = {e.id: e for e in essays}
    unknown = [essay_id for essay_id in parsed if essay_id not in by_id]
    if unknown:
        raise ValueError(f"parsed record for unknown essay {unknown[0]!r}")

    pairs: dict[str, list[RatingPair]] = {}
    failures: dict[str, int] = {}
    clamped: dict[str, int] = {}
    for essay_id, outcome in parsed.items():
        essay = by_id[essay_id]
        set_id = essay.essay_set_id
        meta = metas.get(set_id)
        if meta is None:
            raise ValueError(f"no metadata for essay set {set_id!r}")
        pairs.setdefault(set_id, [])
        failures.setdefault(set_id, 0)
        clamped.setdefault(set_id, 0)
        if isinstance(outcome, ParseFailure):
            failures[set_id] += 1
            continue
        trait = primary_trait(meta)
        if trait not in outcome.scores:
            failures[set_id] += 1
            continue
        if outcome.clamped:
            clamped[set_id] += 1
        pairs[set_id].append(RatingPair(
            essay_id=essay_id,
            predicted=to_bins(outcome.scores[trait], meta),
            gold=to_bins(essay.gold_overall, meta),
        ))

    per_set: dict[str, SetReport] = {}
    warnings: list[str] = []
    for set_id in sorted(pairs):
        set_pairs = pairs[set_id]
        n = len(set_pairs)
        if n == 0:
            per_set[set_id] = SetReport(qwk=None, n=0,
                                        parse_failures=failures[set_id],
                                        clamped=clamped[set_id])
            warnings.append(f"set {set_id}: no parsed essays, excluded from average")
            continue
        try:
            value: float | None = qwk(set_pairs, metas[set_id].num_bins)
        except ValueError as exc:
            value = None
            warnings.append(f"set {set_id}: {exc}")
        per_set[set_id] = SetReport(qwk=value, n=n,
                                    parse_failures=failures[set_id],
                                    clamped=clamped[set_id])

    defined = [r.qwk for r in per_set.values() if r.qwk is not None]
    average = sum(defined) / len(defined) if defined else None
    return EvaluationReport(per_set=per_set, average_qwk=average,
                            config_digest=config_digest, warnings=warnings)
