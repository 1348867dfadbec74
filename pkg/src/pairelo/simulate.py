"""Closed-loop study simulation.

Drives the real scheduler with synthetic raters whose choices are
sampled from the observed-choice model at known true elos and noise
levels.  The result doubles as an end-to-end oracle: a correct pipeline
must recover the true ranking (and, after gauge alignment, the true
values) from its own scheduled questions.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import scheduler
from .analysis import AlignmentResult, align_elos
from .domain import (
    ORIGINAL,
    Answer,
    Comparison,
    EloEstimate,
    EloFit,
    StudyConfig,
    validate_study_config,
)
from .errors import BlockedRaterError, ConfigError
from .model import observed_choice_probability, win_probability


def simulation_config(
    method_elos: Mapping[str, float],
    *,
    seed: int = 0,
    n_images: int = 8,
    golden_rate: float = 0.1,
    golden_threshold: int | None = None,
    refresh_every: int = 50,
) -> StudyConfig:
    """A study config sized for simulation.

    Goldens stay on (they are what identifies per-rater noise), but
    gating defaults off: even a careful synthetic rater fails a few
    goldens over thousands of answers, and recovery runs want the full
    answer budget.  Pass ``golden_threshold`` to exercise gating.
    """
    if golden_threshold is None:
        golden_threshold = 10 ** 9
    return validate_study_config({
        "study": "simulation",
        "methods": [{"id": mid} for mid in method_elos],
        "images": [
            {"id": f"img{i:03d}", "width": 1024, "height": 768}
            for i in range(n_images)
        ],
        "golden": {"rate": golden_rate, "threshold": golden_threshold},
        "scheduler": {"seed": seed, "refresh_every": refresh_every},
    })


@dataclass
class SimulationResult:
    """Everything one simulated study produced."""

    config: StudyConfig
    true_elos: dict[str, float]
    true_noises: dict[str, float]
    comparisons: list[Comparison]
    fit: EloFit
    n_blocked: int = 0

    def alignment(self) -> AlignmentResult:
        reference = [EloEstimate(m, e, e, e) for m, e in self.true_elos.items()]
        return align_elos(self.fit, reference)


def _true_p_left(question, true_elos: Mapping[str, float], noise: float,
                 golden_gap: float) -> float:
    """Probability the simulated rater picks the left side."""
    if question.golden:
        p_correct = observed_choice_probability(
            win_probability(golden_gap, 0.0), noise)
        return p_correct if question.left == ORIGINAL else 1.0 - p_correct
    p_model = win_probability(true_elos[question.left],
                              true_elos[question.right])
    return observed_choice_probability(p_model, noise)


def simulate_study(
    true_elos: Mapping[str, float],
    rater_noises: Mapping[str, float],
    n_answers: int,
    *,
    seed: int = 0,
    config: StudyConfig | None = None,
    golden_gap: float = 800.0,
) -> SimulationResult:
    """Run a full scheduled study with synthetic raters.

    Raters answer in round-robin order, skipping any the gating has
    blocked.  Ends with a fit over every recorded answer (so
    ``fit.n_answers == n_answers`` regardless of the refresh cadence).
    """
    if n_answers < 1:
        raise ConfigError(f"n_answers must be >= 1, got {n_answers}")
    if not rater_noises:
        raise ConfigError("need at least one rater")
    for rater, eps in rater_noises.items():
        if not 0.0 <= eps < 1.0:
            raise ConfigError(f"rater {rater!r}: noise {eps} outside [0, 1)")

    if config is None:
        config = simulation_config(true_elos, seed=seed)
    missing = set(config.method_ids()) - set(true_elos)
    if missing:
        raise ConfigError(f"no true elo for methods: {sorted(missing)}")

    rng = np.random.default_rng(seed)
    state = scheduler.initial_state(config)
    raters = list(rater_noises)

    produced = 0
    turn = 0
    while produced < n_answers:
        live = [r for r in raters if not state.rater(r).blocked]
        if not live:
            break
        rater = live[turn % len(live)]
        turn += 1
        question = scheduler.next_question(rater, state, now=float(produced))
        p_left = _true_p_left(question, true_elos, rater_noises[rater],
                              golden_gap)
        choice = "left" if rng.random() < p_left else "right"
        scheduler.record_answer(
            Answer(question=question.id, rater=rater, choice=choice,
                   answered_at=float(produced)),
            state,
        )
        produced += 1

    scheduler.refresh_fit(state)
    n_blocked = sum(state.rater(r).blocked for r in raters)
    return SimulationResult(
        config=config,
        true_elos=dict(true_elos),
        true_noises=dict(rater_noises),
        comparisons=list(state.comparisons),
        fit=state.current_fit,
        n_blocked=n_blocked,
    )


RATINGS_HEADER = ["rater", "image", "method_a", "method_b", "choice",
                  "golden", "toggles"]


def comparisons_to_csv(comparisons: Sequence[Comparison],
                       target: str | Path | io.TextIOBase) -> None:
    """Write comparisons as a ratings file; ``choice`` is the winning token."""
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            comparisons_to_csv(comparisons, fh)
        return
    writer = csv.writer(target)
    writer.writerow(RATINGS_HEADER)
    for c in comparisons:
        writer.writerow([c.rater, c.image, c.left, c.right, c.winner,
                         int(c.golden), c.toggles])


@dataclass
class RecoveryReport:
    """How well a fit recovered the elos that generated its data."""

    alignment: AlignmentResult
    true_elos: dict[str, float]
    noise_errors: dict[str, float] = field(default_factory=dict)

    @property
    def rank_exact(self) -> bool:
        return self.alignment.spearman == 1.0

    @property
    def max_abs_delta(self) -> float:
        """Largest |recovered - true| under mean-translation alignment."""
        return self.alignment.max_abs_delta

    @property
    def chebyshev_max_delta(self) -> float:
        """Largest |recovered - true| under the translation minimizing it.

        The gauge is an arbitrary translation, so this is the
        translation-invariant distance between the two elo profiles:
        half the spread of the per-method deltas.
        """
        by_method = {e.method: e.elo for e in self.alignment.aligned}
        deltas = [by_method[m] - t for m, t in self.true_elos.items()]
        return (max(deltas) - min(deltas)) / 2.0

    def to_text(self) -> str:
        lines = ["method,true_elo,recovered_elo,delta"]
        by_method = {e.method: e for e in self.alignment.aligned}
        for method in sorted(self.true_elos):
            true = self.true_elos[method]
            got = by_method[method].elo
            lines.append(f"{method},{true:.2f},{got:.2f},{got - true:+.2f}")
        lines.append(f"# spearman={self.alignment.spearman:.4f} "
                     f"max_abs_delta={self.max_abs_delta:.2f} "
                     f"rank_exact={self.rank_exact}")
        return "\n".join(lines) + "\n"


def recovery_report(result: SimulationResult) -> RecoveryReport:
    noise_errors = {
        rater: result.fit.rater_noise.get(rater, float("nan")) - eps
        for rater, eps in result.true_noises.items()
    }
    return RecoveryReport(
        alignment=result.alignment(),
        true_elos=dict(result.true_elos),
        noise_errors=noise_errors,
    )
