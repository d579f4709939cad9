"""Zero-shot LLM essay scoring with linguistic-feature prompts.

Pipeline: ingest essays (:mod:`essayscore.corpus`), compute ten surface
linguistic features (:mod:`essayscore.textstats`), assemble the scoring
prompt (:mod:`essayscore.promptkit`), obtain a completion
(:mod:`essayscore.llm`), recover a structured score
(:mod:`essayscore.scoreparse`) and measure agreement with human graders
via quadratic weighted kappa (:mod:`essayscore.evalkit`).  The
:mod:`essayscore.cli` module wires the stages into resumable experiment
runs.
"""

__version__ = "0.1.0"
