"""Experiment runner: features, split, score, parse, evaluate, run.

Every stage is independently re-runnable and all intermediate artifacts
are plain TSV/JSON-lines, inspectable without this tool.  A scoring run
journals per-essay progress; interrupted runs resume without re-issuing
any completed LLM call (raw outputs and the response cache double as the
resume state).  With a deterministic backend, re-running a config yields
byte-identical raw outputs, parsed records and reports.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from . import corpus, evalkit, scoreparse
from .corpus import Essay, EssaySetMeta
from .llm import (DEFAULT_MAX_TOKENS, DEFAULT_TIMEOUT_S, HttpBackend, LlmClient,
                  LlmRequest, MockBackend, MockRule, ResponseCache, RetryPolicy)
from .promptkit import (DEFAULT_PERSONA, FeatureBlock, FeatureSelection,
                        build_scoring_prompt, default_scoring_spec)
from .textstats import FEATURE_NAMES, extract_features


@dataclass(frozen=True)
class DatasetConfig:
    kind: str  # asap | ellipse
    path: str
    meta_path: str
    columns: Mapping[str, object] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("asap", "ellipse"):
            raise ValueError(f"dataset.kind must be asap or ellipse, got {self.kind!r}")


@dataclass(frozen=True)
class SplitConfig:
    k: int = 5
    seed: int = 42
    role: str = "all"  # train | dev | test | all

    def __post_init__(self) -> None:
        if self.role not in ("train", "dev", "test", "all"):
            raise ValueError(f"split.role must be train/dev/test/all, got {self.role!r}")


@dataclass(frozen=True)
class ModelConfig:
    name: str
    endpoint: str = ""
    parser_name: str = ""  # defaults to name
    temperature: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS
    concurrency: int = 4
    api_key_env: str = ""
    request_cap: int | None = None
    timeout_s: float = DEFAULT_TIMEOUT_S
    retries: int = 3


@dataclass(frozen=True)
class SubsampleConfig:
    n: int
    seed: int


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig
    model: ModelConfig
    output_dir: str
    selection: str = "none"
    split: SplitConfig = SplitConfig()
    parser_mode: str = "hybrid"  # hybrid | llm_only
    persona: str = ""
    prompt_overrides: Mapping[str, str] | None = None
    subsample: SubsampleConfig | None = None
    cache_dir: str = ""

    def __post_init__(self) -> None:
        FeatureSelection.parse(self.selection)  # validate early
        if self.parser_mode not in ("hybrid", "llm_only"):
            raise ValueError(f"parser.mode must be hybrid or llm_only, got {self.parser_mode!r}")

    def resolved_dict(self) -> dict:
        d = asdict(self)
        d["dataset"]["columns"] = dict(d["dataset"]["columns"] or {})
        d["prompt_overrides"] = dict(d["prompt_overrides"] or {})
        return d

    def digest(self) -> str:
        payload = json.dumps(self.resolved_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_run_config(path: str | Path) -> RunConfig:
    doc = yaml.safe_load(Path(path).read_text("utf-8")) or {}
    ds = doc.get("dataset") or {}
    model = doc.get("model") or {}
    split = doc.get("split") or {}
    sub = doc.get("subsample")
    return RunConfig(
        dataset=DatasetConfig(
            kind=ds.get("kind", "asap"),
            path=ds["path"],
            meta_path=ds["meta_path"],
            columns=ds.get("columns"),
        ),
        model=ModelConfig(
            name=model.get("name", "mock"),
            endpoint=model.get("endpoint", ""),
            parser_name=model.get("parser_name", ""),
            temperature=float(model.get("temperature", 0.0)),
            max_tokens=int(model.get("max_tokens", DEFAULT_MAX_TOKENS)),
            concurrency=int(model.get("concurrency", 4)),
            api_key_env=model.get("api_key_env", ""),
            request_cap=model.get("request_cap"),
            timeout_s=float(model.get("timeout_s", DEFAULT_TIMEOUT_S)),
            retries=int(model.get("retries", 3)),
        ),
        output_dir=doc["output_dir"],
        selection=str(doc.get("selection", "none")),
        split=SplitConfig(
            k=int(split.get("k", 5)),
            seed=int(split.get("seed", 42)),
            role=split.get("role", "all"),
        ),
        parser_mode=(doc.get("parser") or {}).get("mode", "hybrid"),
        persona=doc.get("persona") or "",
        prompt_overrides=doc.get("prompt_overrides"),
        subsample=(SubsampleConfig(n=int(sub["n"]), seed=int(sub["seed"]))
                   if sub else None),
        cache_dir=doc.get("cache_dir") or "",
    )


def _load_dataset(cfg: DatasetConfig) -> tuple[list[Essay], dict[str, EssaySetMeta],
                                               list[corpus.RejectedRow]]:
    metas = corpus.load_metas(cfg.meta_path)
    columns = cfg.columns or {}
    if cfg.kind == "asap":
        result = corpus.load_asap(cfg.path, metas,
                                  corpus.AsapColumns(**columns))
    else:
        if len(metas) != 1:
            raise ValueError("ellipse metadata must declare exactly one essay set")
        (meta,) = metas.values()
        kwargs = dict(columns)
        if "traits" in kwargs:
            kwargs["traits"] = tuple(kwargs["traits"])
        result = corpus.load_ellipse(cfg.path, meta, corpus.EllipseColumns(**kwargs))
    return result.essays, metas, result.rejects


def _select_essays(config: RunConfig, essays: list[Essay]) -> list[Essay]:
    """Role filter then per-set seeded subsample, in deterministic order."""
    chosen = essays
    if config.split.role != "all":
        folds = corpus.split_folds(essays, config.split.k, config.split.seed)
        roles = corpus.select_roles(folds)
        keep = getattr(roles, config.split.role)
        chosen = [e for e in chosen if e.id in keep]
    chosen = sorted(chosen, key=lambda e: (e.essay_set_id, e.id))
    if config.subsample is not None:
        per_set: dict[str, list[Essay]] = {}
        for e in chosen:
            per_set.setdefault(e.essay_set_id, []).append(e)
        sampled: list[Essay] = []
        for set_id in sorted(per_set):
            group = per_set[set_id]
            if len(group) > config.subsample.n:
                rng = corpus.seeded_rng(config.subsample.seed, set_id)
                picks = rng.choice(len(group), size=config.subsample.n, replace=False)
                group = [group[i] for i in sorted(picks)]
            sampled.extend(group)
        chosen = sampled
    return chosen


def _build_backend(config: RunConfig, mock_path: str | None,
                   essays: Sequence[Essay], metas: Mapping[str, EssaySetMeta]):
    if mock_path:
        return load_mock_backend(mock_path, essays, metas)
    if os.environ.get("NO_NETWORK") == "1":
        raise SystemExit("NO_NETWORK=1 is set: pass --mock or unset it for live runs")
    if not config.model.endpoint:
        raise SystemExit("model.endpoint is empty: live runs need an endpoint "
                         "(or pass --mock)")
    return HttpBackend(config.model.endpoint,
                       api_key_env=config.model.api_key_env or None,
                       timeout_s=config.model.timeout_s)


def load_mock_backend(path: str | Path, essays: Sequence[Essay],
                      metas: Mapping[str, EssaySetMeta]) -> MockBackend:
    """Mock script: ``mode: echo`` or ``mode: rules`` (see README)."""
    doc = yaml.safe_load(Path(path).read_text("utf-8")) or {}
    mode = doc.get("mode", "rules")
    if mode == "echo":
        gold: dict[str, dict[str, float]] = {}
        for e in essays:
            meta = metas[e.essay_set_id]
            gold[e.id] = {evalkit.primary_trait(meta): e.gold_overall}
        kwargs = {}
        if doc.get("id_pattern"):
            kwargs["id_pattern"] = doc["id_pattern"]
        if doc.get("explanation"):
            kwargs["explanation"] = doc["explanation"]
        return MockBackend.echo(gold, **kwargs)
    rules = []
    for i, entry in enumerate(doc.get("rules") or []):
        response = entry.get("response", "")
        if entry.get("response_file"):
            response = (Path(path).parent / entry["response_file"]).read_text("utf-8")
        rules.append(MockRule(
            response=response,
            match=entry.get("match"),
            fail_times=int(entry.get("fail_times", 0)),
            priority=entry.get("priority"),
        ))
    return MockBackend(rules=rules, default=doc.get("default"),
                       strict=bool(doc.get("strict", False)))


@dataclass
class RunPaths:
    root: Path
    raw: Path = field(init=False)
    journal: Path = field(init=False)
    parsed: Path = field(init=False)
    skipped: Path = field(init=False)
    config: Path = field(init=False)
    rejects: Path = field(init=False)

    def __post_init__(self) -> None:
        self.raw = self.root / "raw"
        self.journal = self.root / "journal.jsonl"
        self.parsed = self.root / "parsed.jsonl"
        self.skipped = self.root / "skipped.txt"
        self.config = self.root / "config.resolved.json"
        self.rejects = self.root / "rejects.tsv"


class Journal:
    """Append-only per-essay event log; purely observational."""

    def __init__(self, path: Path):
        self.path = path
        self._fh = open(path, "a", encoding="utf-8")
        self._lock = threading.Lock()

    def record(self, essay_id: str, event: str, **extra) -> None:
        entry = {"essay_id": essay_id, "event": event, "ts": round(time.time(), 3)}
        entry.update(extra)
        line = json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock:  # workers journal concurrently
            self._fh.write(line)
            self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def cmd_score(config: RunConfig, mock_path: str | None = None,
              resume: bool = False, echo=print) -> Path:
    """Prompt, complete, parse and persist every selected essay."""
    paths = RunPaths(Path(config.output_dir))
    if paths.root.exists() and not resume and any(paths.raw.glob("*.txt")):
        raise SystemExit(f"{paths.root} already holds a run; pass --resume to continue")
    paths.root.mkdir(parents=True, exist_ok=True)
    paths.raw.mkdir(exist_ok=True)

    essays, metas, rejects = _load_dataset(config.dataset)
    if rejects:
        corpus.write_rejects(rejects, paths.rejects)
        echo(f"{len(rejects)} rejected rows written to {paths.rejects}")
    selected = _select_essays(config, essays)

    digest = config.digest()
    paths.config.write_text(json.dumps(
        {"config": config.resolved_dict(), "digest": digest},
        indent=2, sort_keys=True, ensure_ascii=False) + "\n", "utf-8")

    backend = _build_backend(config, mock_path, essays, metas)
    cache = ResponseCache(Path(config.cache_dir) if config.cache_dir
                          else paths.root / "cache")
    client = LlmClient(backend, cache=cache,
                       retry=RetryPolicy(max_retries=config.model.retries))

    selection = FeatureSelection.parse(config.selection)
    ranking = None
    if selection.kind == "computed":
        vectors = {e.id: extract_features(e.text) for e in selected}
        golds = {e.id: e.gold_overall for e in selected}
        from .textstats import rank_features
        ranking = rank_features(golds, vectors)

    cap = config.model.request_cap
    to_score = selected if cap is None else selected[:cap]
    skipped = [] if cap is None else selected[cap:]

    journal = Journal(paths.journal)
    parser_model = config.model.parser_name or config.model.name
    persona = config.persona or DEFAULT_PERSONA
    outcomes: dict[str, scoreparse.ParsedScore | scoreparse.ParseFailure] = {}

    def prompt_for(essay: Essay) -> str:
        meta = metas[essay.essay_set_id]
        block = None
        if selection.kind != "none":
            block = FeatureBlock.from_vector(extract_features(essay.text),
                                             selection, ranking)
        journal.record(essay.id, "featured" if block else "prompted")
        return build_scoring_prompt(default_scoring_spec(
            meta, essay.text, additional_info=block, persona=persona,
            overrides=config.prompt_overrides))

    def complete_one(essay: Essay) -> tuple[Essay, str]:
        raw_path = paths.raw / f"{essay.id}.txt"
        if resume and raw_path.exists():
            return essay, raw_path.read_text("utf-8")
        request = LlmRequest(model=config.model.name, prompt=prompt_for(essay),
                             temperature=config.model.temperature,
                             max_tokens=config.model.max_tokens)
        response = client.complete(request)
        raw_path.write_text(response.text, "utf-8")
        journal.record(essay.id, "completed", cached=response.cached)
        return essay, response.text

    try:
        with ThreadPoolExecutor(max_workers=max(1, config.model.concurrency)) as pool:
            for essay, raw in pool.map(complete_one, to_score):
                outcome = scoreparse.parse(raw, metas[essay.essay_set_id],
                                           client=client, model=parser_model,
                                           mode=config.parser_mode)
                outcomes[essay.id] = outcome
                ok = isinstance(outcome, scoreparse.ParsedScore)
                journal.record(essay.id, "parsed" if ok else "parse_failed")
        for essay in skipped:
            journal.record(essay.id, "skipped", reason="request_cap")
    finally:
        journal.close()

    with open(paths.parsed, "w", encoding="utf-8") as f:
        for essay_id in sorted(outcomes):
            f.write(json.dumps(scoreparse.parsed_record(essay_id, outcomes[essay_id]),
                               ensure_ascii=False, sort_keys=True) + "\n")
    if skipped:
        paths.skipped.write_text(
            "".join(f"{e.id}\n" for e in sorted(skipped, key=lambda e: e.id)), "utf-8")
    echo(f"scored {len(to_score)} essays "
         f"({sum(1 for o in outcomes.values() if isinstance(o, scoreparse.ParseFailure))}"
         f" parse failures, {len(skipped)} skipped) -> {paths.root}")
    return paths.root


def cmd_parse(run_dir: str | Path, mock_path: str | None = None, echo=print) -> Path:
    """Re-parse raw outputs in place (no scoring calls)."""
    paths = RunPaths(Path(run_dir))
    stored = json.loads(paths.config.read_text("utf-8"))
    config = _config_from_resolved(stored["config"])
    essays, metas, _ = _load_dataset(config.dataset)
    by_id = {e.id: e for e in essays}

    client = None
    if mock_path:
        backend = load_mock_backend(mock_path, essays, metas)
        client = LlmClient(backend, cache=ResponseCache(paths.root / "cache"))
    parser_model = config.model.parser_name or config.model.name

    outcomes = {}
    for raw_path in sorted(paths.raw.glob("*.txt")):
        essay_id = raw_path.stem
        essay = by_id.get(essay_id)
        if essay is None:
            raise SystemExit(f"raw output {raw_path.name} has no essay in the dataset")
        raw = raw_path.read_text("utf-8")
        outcomes[essay_id] = scoreparse.parse(raw, metas[essay.essay_set_id],
                                              client=client, model=parser_model,
                                              mode=config.parser_mode)
    with open(paths.parsed, "w", encoding="utf-8") as f:
        for essay_id in sorted(outcomes):
            f.write(json.dumps(scoreparse.parsed_record(essay_id, outcomes[essay_id]),
                               ensure_ascii=False, sort_keys=True) + "\n")
    echo(f"re-parsed {len(outcomes)} raw outputs -> {paths.parsed}")
    return paths.parsed


def _config_from_resolved(d: Mapping) -> RunConfig:
    return RunConfig(
        dataset=DatasetConfig(**d["dataset"]),
        model=ModelConfig(**d["model"]),
        output_dir=d["output_dir"],
        selection=d["selection"],
        split=SplitConfig(**d["split"]),
        parser_mode=d["parser_mode"],
        persona=d["persona"],
        prompt_overrides=d.get("prompt_overrides") or None,
        subsample=SubsampleConfig(**d["subsample"]) if d.get("subsample") else None,
        cache_dir=d.get("cache_dir", ""),
    )


def _outcome_from_record(record: Mapping) -> scoreparse.ParsedScore | scoreparse.ParseFailure:
    if "failure" in record:
        return scoreparse.ParseFailure(
            reason=scoreparse.FailureReason(record["failure"]),
            detail=record.get("detail", ""),
            raw="")
    return scoreparse.ParsedScore(
        scores=dict(record["scores"]),
        raw="",
        source=record.get("source", "deterministic"),
        explanation=record.get("explanation"),
        feedback=record.get("feedback"),
        clamped_traits=tuple(record.get("clamped", ())),
        extra_scores=dict(record.get("extra_scores", {})),
    )


def cmd_evaluate(run_dir: str | Path, json_out: str | None = None,
                 echo=print) -> evalkit.EvaluationReport:
    """Build the per-set/average QWK report for a finished run."""
    paths = RunPaths(Path(run_dir))
    stored = json.loads(paths.config.read_text("utf-8"))
    config = _config_from_resolved(stored["config"])
    digest = config.digest()
    if digest != stored["digest"]:
        raise SystemExit(f"config digest mismatch in {paths.config}: "
                         f"stored {stored['digest'][:12]}, recomputed {digest[:12]}")

    essays, metas, _ = _load_dataset(config.dataset)
    parsed: dict[str, scoreparse.ParsedScore | scoreparse.ParseFailure] = {}
    with open(paths.parsed, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            record = json.loads(line)
            parsed[record["essay_id"]] = _outcome_from_record(record)

    report = evalkit.build_report(parsed, essays, metas, config_digest=digest)
    (paths.root / "report.json").write_text(report.to_json(), "utf-8")
    (paths.root / "report.txt").write_text(report.render_text(), "utf-8")
    if json_out:
        Path(json_out).write_text(report.to_json(), "utf-8")
    echo(report.render_text(), end="")
    return report


def cmd_features(dataset_path: str, meta_path: str, kind: str, out: str,
                 echo=print) -> None:
    cfg = DatasetConfig(kind=kind, path=dataset_path, meta_path=meta_path)
    essays, _, rejects = _load_dataset(cfg)
    lines = ["essay_id\tessay_set\t" + "\t".join(FEATURE_NAMES)]
    for e in sorted(essays, key=lambda e: (e.essay_set_id, e.id)):
        vec = extract_features(e.text)
        lines.append(f"{e.id}\t{e.essay_set_id}\t"
                     + "\t".join(str(getattr(vec, n)) for n in FEATURE_NAMES))
    Path(out).write_text("\n".join(lines) + "\n", "utf-8")
    echo(f"{len(essays)} feature rows -> {out}"
         + (f" ({len(rejects)} rows rejected)" if rejects else ""))


def cmd_split(dataset_path: str, meta_path: str, kind: str, k: int, seed: int,
              out: str, echo=print) -> None:
    cfg = DatasetConfig(kind=kind, path=dataset_path, meta_path=meta_path)
    essays, _, _ = _load_dataset(cfg)
    folds = corpus.split_folds(essays, k=k, seed=seed)
    with open(out, "w", encoding="utf-8") as f:
        for essay_id in sorted(folds.assignment):
            f.write(f"{essay_id}\t{folds.assignment[essay_id]}\n")
    echo(f"{len(folds.assignment)} fold assignments -> {out}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="essayscore",
        description="Zero-shot LLM essay scoring with linguistic-feature prompts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="extract the ten features to a TSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--kind", choices=["asap", "ellipse"], default="asap")
    p.add_argument("--out", required=True)

    p = sub.add_parser("split", help="write deterministic fold assignments")
    p.add_argument("--dataset", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--kind", choices=["asap", "ellipse"], default="asap")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)

    p = sub.add_parser("score", help="run prompting + parsing for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--mock", help="mock backend script (YAML)")
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("parse", help="re-parse raw outputs of a run")
    p.add_argument("run_dir")
    p.add_argument("--mock", help="mock backend script for the parse fallback")

    p = sub.add_parser("evaluate", help="QWK report for a finished run")
    p.add_argument("run_dir")
    p.add_argument("--json", dest="json_out")

    p = sub.add_parser("run", help="score + evaluate in one go")
    p.add_argument("--config", required=True)
    p.add_argument("--mock")
    p.add_argument("--resume", action="store_true")

    args = parser.parse_args(argv)
    if args.command == "features":
        cmd_features(args.dataset, args.meta, args.kind, args.out)
    elif args.command == "split":
        cmd_split(args.dataset, args.meta, args.kind, args.k, args.seed, args.out)
    elif args.command == "score":
        cmd_score(load_run_config(args.config), mock_path=args.mock, resume=args.resume)
    elif args.command == "parse":
        cmd_parse(args.run_dir, mock_path=args.mock)
    elif args.command == "evaluate":
        cmd_evaluate(args.run_dir, json_out=args.json_out)
    elif args.command == "run":
        run_dir = cmd_score(load_run_config(args.config), mock_path=args.mock,
                            resume=args.resume)
        cmd_evaluate(run_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
