"""Pairwise subjective image-quality evaluation.

Forced-choice comparisons go in; Elo-style quality scores with credible
intervals, per-rater reliability, and cross-encoder bitrate-savings
reports come out.  The pieces:

- :mod:`pairelo.model`: the preference model and its MAP fitter
  (also wrapped as the sklearn-style :class:`EloModel` estimator).
- :mod:`pairelo.scheduler`: active pair selection, golden questions,
  rater gating.
- :mod:`pairelo.analysis`: quality ladders, bitrate interpolation,
  equivalent-quality tables.
- :mod:`pairelo.ingestion`: ratings parsing and degraded-corpus builds.
- :mod:`pairelo.simulate`: closed-loop synthetic studies.
- :mod:`pairelo.study` / :mod:`pairelo.service`: the durable study
  store and its HTTP front end (import these directly; they pull in the
  web stack).
- :mod:`pairelo.cli`: the ``pairelo`` command.
"""

from .analysis import (
    Ladder,
    align_elos,
    bitrate_at_elo,
    bitrate_reduction,
    build_ladder,
    elo_at_bitrate,
    equivalent_quality_table,
    format_elo_table,
    load_reference_table,
    parse_reference_table,
)
from .domain import (
    ORIGINAL,
    Answer,
    Comparison,
    EloEstimate,
    EloFit,
    ImageRef,
    Method,
    Priors,
    Question,
    StudyConfig,
    validate_study_config,
)
from .errors import PairEloError
from .ingestion import CorpusManifest, build_corpus, corpus_stats, parse_answers
from .model import (
    EloModel,
    credible_intervals,
    fit_map,
    observed_choice_probability,
    sample_posterior,
    win_probability,
)
from .simulate import recovery_report, simulate_study

__version__ = "0.1.0"

__all__ = [
    "ORIGINAL",
    "Answer",
    "Comparison",
    "CorpusManifest",
    "EloEstimate",
    "EloFit",
    "EloModel",
    "ImageRef",
    "Ladder",
    "Method",
    "PairEloError",
    "Priors",
    "Question",
    "StudyConfig",
    "align_elos",
    "bitrate_at_elo",
    "bitrate_reduction",
    "build_corpus",
    "build_ladder",
    "corpus_stats",
    "credible_intervals",
    "elo_at_bitrate",
    "equivalent_quality_table",
    "fit_map",
    "format_elo_table",
    "load_reference_table",
    "observed_choice_probability",
    "parse_answers",
    "parse_reference_table",
    "recovery_report",
    "sample_posterior",
    "simulate_study",
    "validate_study_config",
    "win_probability",
]
