import json
import shutil
from pathlib import Path

import pytest
import yaml

from essayscore import cli
from essayscore.cli import (cmd_evaluate, cmd_parse, cmd_score,
                            load_mock_backend, load_run_config, main)

FIXTURES = Path(__file__).parent / "fixtures"


def write_config(tmp_path, output_dir, **overrides) -> Path:
    doc = {
        "dataset": {"kind": "asap",
                    "path": str(FIXTURES / "asap_tiny.tsv"),
                    "meta_path": str(FIXTURES / "meta_tiny.yaml")},
        "split": {"k": 5, "seed": 42, "role": "all"},
        "selection": "top10",
        "model": {"name": "mock-echo", "concurrency": 2},
        "parser": {"mode": "hybrid"},
        "output_dir": str(output_dir),
    }
    doc.update(overrides)
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(doc), "utf-8")
    return path


def quiet(*args, **kwargs):
    pass


class TestConfig:
    def test_load_and_digest_stable(self, tmp_path):
        path = write_config(tmp_path, tmp_path / "run")
        config = load_run_config(path)
        assert config.selection == "top10"
        assert config.digest() == load_run_config(path).digest()

    def test_bad_selection_rejected(self, tmp_path):
        path = write_config(tmp_path, tmp_path / "run", selection="top99")
        with pytest.raises(ValueError):
            load_run_config(path)

    def test_bad_parser_mode_rejected(self, tmp_path):
        path = write_config(tmp_path, tmp_path / "run", parser={"mode": "psychic"})
        with pytest.raises(ValueError):
            load_run_config(path)


class TestFeaturesCommand:
    def test_writes_feature_table(self, tmp_path):
        out = tmp_path / "features.tsv"
        main(["features", "--dataset", str(FIXTURES / "asap_tiny.tsv"),
              "--meta", str(FIXTURES / "meta_tiny.yaml"), "--out", str(out)])
        lines = out.read_text().splitlines()
        header = lines[0].split("\t")
        assert header[:2] == ["essay_id", "essay_set"]
        assert len(header) == 12
        assert len(lines) == 41

    def test_ellipse_kind(self, tmp_path):
        out = tmp_path / "features.tsv"
        main(["features", "--dataset", str(FIXTURES / "ellipse_tiny.csv"),
              "--meta", str(FIXTURES / "meta_ellipse_tiny.yaml"),
              "--kind", "ellipse", "--out", str(out)])
        assert len(out.read_text().splitlines()) == 13


class TestSplitCommand:
    def test_writes_fold_lines(self, tmp_path):
        out = tmp_path / "folds.tsv"
        main(["split", "--dataset", str(FIXTURES / "asap_tiny.tsv"),
              "--meta", str(FIXTURES / "meta_tiny.yaml"),
              "--k", "5", "--seed", "7", "--out", str(out)])
        rows = [line.split("\t") for line in out.read_text().splitlines()]
        assert len(rows) == 40
        assert {fold for _, fold in rows} == {"0", "1", "2", "3", "4"}

    def test_deterministic_across_invocations(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / f"{name}.tsv"
            main(["split", "--dataset", str(FIXTURES / "asap_tiny.tsv"),
                  "--meta", str(FIXTURES / "meta_tiny.yaml"),
                  "--k", "5", "--seed", "7", "--out", str(out)])
            outs.append(out.read_text())
        assert outs[0] == outs[1]


class TestScoreEvaluate:
    def test_echo_run_reaches_perfect_agreement(self, tmp_path):
        config = load_run_config(write_config(tmp_path, tmp_path / "run"))
        run_dir = cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"),
                            echo=quiet)
        report = cmd_evaluate(run_dir, echo=quiet)
        assert report.average_qwk == 1.0
        assert all(r.qwk == 1.0 for r in report.per_set.values())
        assert sum(r.n for r in report.per_set.values()) == 40
        assert len(list((run_dir / "raw").glob("*.txt"))) == 40

    def test_role_filter_scores_test_fold_only(self, tmp_path):
        config = load_run_config(write_config(
            tmp_path, tmp_path / "run",
            split={"k": 5, "seed": 42, "role": "test"}))
        run_dir = cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"),
                            echo=quiet)
        assert len(list((run_dir / "raw").glob("*.txt"))) == 8

    def test_request_cap_marks_skipped(self, tmp_path):
        config = load_run_config(write_config(
            tmp_path, tmp_path / "run",
            model={"name": "mock-echo", "concurrency": 1, "request_cap": 3}))
        run_dir = cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"),
                            echo=quiet)
        assert len(list((run_dir / "raw").glob("*.txt"))) == 3
        skipped = (run_dir / "skipped.txt").read_text().splitlines()
        assert len(skipped) == 37
        report = cmd_evaluate(run_dir, echo=quiet)
        assert sum(r.n for r in report.per_set.values()) == 3

    def test_subsample_is_seeded_and_capped(self, tmp_path):
        config = load_run_config(write_config(
            tmp_path, tmp_path / "run", subsample={"n": 5, "seed": 9}))
        run_dir = cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"),
                            echo=quiet)
        raw_ids = sorted(p.stem for p in (run_dir / "raw").glob("*.txt"))
        assert len(raw_ids) == 10  # 5 per essay set
        config2 = load_run_config(write_config(
            tmp_path, tmp_path / "run2", subsample={"n": 5, "seed": 9}))
        run_dir2 = cmd_score(config2, mock_path=str(FIXTURES / "mock_echo.yaml"),
                             echo=quiet)
        assert raw_ids == sorted(p.stem for p in (run_dir2 / "raw").glob("*.txt"))

    def test_resume_only_issues_missing_calls(self, tmp_path, monkeypatch):
        config = load_run_config(write_config(tmp_path, tmp_path / "run"))
        backends = []
        original = cli.load_mock_backend

        def capturing(path, essays, metas):
            backend = original(path, essays, metas)
            backends.append(backend)
            return backend

        monkeypatch.setattr(cli, "load_mock_backend", capturing)
        run_dir = cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"),
                            echo=quiet)
        assert backends[0].call_count == 40

        # simulate an interruption that left only 5 completed essays behind
        kept = sorted((run_dir / "raw").glob("*.txt"))[:5]
        for path in sorted((run_dir / "raw").glob("*.txt"))[5:]:
            path.unlink()
        (run_dir / "parsed.jsonl").unlink()
        shutil.rmtree(run_dir / "cache")

        cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"),
                  resume=True, echo=quiet)
        assert backends[1].call_count == 35
        assert len(list((run_dir / "raw").glob("*.txt"))) == 40
        assert {p.name for p in kept} <= {p.name for p in (run_dir / "raw").glob("*.txt")}

    def test_refuses_accidental_overwrite(self, tmp_path):
        config = load_run_config(write_config(tmp_path, tmp_path / "run"))
        cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"), echo=quiet)
        with pytest.raises(SystemExit, match="--resume"):
            cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"), echo=quiet)

    def test_tamper_check(self, tmp_path):
        config = load_run_config(write_config(tmp_path, tmp_path / "run"))
        run_dir = cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"),
                            echo=quiet)
        stored = json.loads((run_dir / "config.resolved.json").read_text())
        stored["config"]["selection"] = "none"
        (run_dir / "config.resolved.json").write_text(json.dumps(stored))
        with pytest.raises(SystemExit, match="digest mismatch"):
            cmd_evaluate(run_dir, echo=quiet)

    def test_reparse_matches_original(self, tmp_path):
        config = load_run_config(write_config(tmp_path, tmp_path / "run"))
        run_dir = cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"),
                            echo=quiet)
        first = (run_dir / "parsed.jsonl").read_text()
        cmd_parse(run_dir, echo=quiet)
        assert (run_dir / "parsed.jsonl").read_text() == first

    def test_no_network_requires_mock(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NO_NETWORK", "1")
        config = load_run_config(write_config(
            tmp_path, tmp_path / "run",
            model={"name": "real", "endpoint": "http://example.invalid/v1"}))
        with pytest.raises(SystemExit, match="NO_NETWORK"):
            cmd_score(config, echo=quiet)

    def test_prompt_overrides_reach_rendered_prompt(self, tmp_path):
        config = load_run_config(write_config(
            tmp_path, tmp_path / "run", selection="none",
            prompt_overrides={"persona": "You are a strict school examiner."}))
        run_dir = cmd_score(config, mock_path=str(FIXTURES / "mock_echo.yaml"),
                            echo=quiet)
        cache_files = list((run_dir / "cache").rglob("*.json"))
        assert cache_files
        stored = json.loads(cache_files[0].read_text())
        assert stored["request"]["prompt"].startswith("You are a strict school examiner.")


class TestMainEntry:
    def test_run_subcommand_end_to_end(self, tmp_path, capsys):
        cfg = write_config(tmp_path, tmp_path / "run", selection="unique_word")
        code = main(["run", "--config", str(cfg),
                     "--mock", str(FIXTURES / "mock_echo.yaml")])
        assert code == 0
        out = capsys.readouterr().out
        assert "Avg." in out and "1.000" in out
        assert (tmp_path / "run" / "report.json").exists()


class TestMockScript:
    def test_rules_script(self, tmp_path):
        script = tmp_path / "mock.yaml"
        script.write_text(yaml.safe_dump({
            "mode": "rules",
            "rules": [{"match": "Analyzed Student Essay",
                       "response": "### Score:\n- Overall: 2"}],
        }), "utf-8")
        backend = load_mock_backend(script, [], {})
        from essayscore.llm import LlmRequest
        out = backend.complete_text(LlmRequest(
            model="m", prompt="### Analyzed Student Essay: hi"))
        assert out.text.endswith("Overall: 2")

    def test_rules_run_end_to_end(self, tmp_path):
        script = tmp_path / "mock.yaml"
        script.write_text(yaml.safe_dump({
            "mode": "rules",
            "rules": [{"match": "Analyzed Student Essay",
                       "response": "### Score:\n- Overall: 2"}],
        }), "utf-8")
        config = load_run_config(write_config(tmp_path, tmp_path / "run",
                                              selection="none"))
        run_dir = cmd_score(config, mock_path=str(script), echo=quiet)
        report = cmd_evaluate(run_dir, echo=quiet)
        # constant predictions vs varied gold: kappa 0, but everything parsed
        assert sum(r.n for r in report.per_set.values()) == 40
        assert all(r.parse_failures == 0 for r in report.per_set.values())
