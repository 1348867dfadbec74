"""Active question scheduling: informative pairs, golden injection, gating.

The scheduler keeps a current Elo fit and, per question, either injects a
golden comparison (probability g) or serves the method pair whose answer
is expected to shrink posterior uncertainty the most.  Raters who miss
too many golden questions are blocked.

All randomness is drawn from a per-question RNG derived from the study
seed and a monotone question counter, so replaying the same answer
sequence reproduces the same questions bit for bit.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

from .domain import (
    ORIGINAL,
    Answer,
    Comparison,
    EloFit,
    Question,
    RaterState,
    StudyConfig,
    heavy_degraded_id,
)
from .errors import (
    BlockedRaterError,
    DuplicateAnswerError,
    NoEligibleImageError,
    UnknownMethodError,
    UnknownQuestionError,
)
from .model import fit_map, posterior_sd, win_probability


def pair_score(pair: tuple[str, str], fit: EloFit) -> float:
    """Expected informativeness of comparing this pair.

    Var(elo_i - elo_j) * p * (1-p): prefer pairs whose gap is uncertain,
    and matchups whose outcome is genuinely in doubt.  An 800-point gap
    drops the outcome factor to ~0.0098 from the 0.25 of an even match.

    For a fit without a stored covariance the gap variance reduces to
    sigma_i^2 + sigma_j^2.  The covariance term matters in closed loop: an
    answer only ever tightens a pair's gap, so a heavily sampled pair
    whose joint offset to the rest of the field still floats would
    otherwise keep looking informative forever and starve the cross links
    that actually pin it down.
    """
    a, b = pair
    try:
        ea, eb = fit.estimate_of(a), fit.estimate_of(b)
        cov_ab = fit.elo_covariance(a, b)
    except KeyError as exc:
        raise UnknownMethodError(f"unknown method {exc.args[0]!r}") from None
    var_a = posterior_sd(ea, fit.interval_level) ** 2
    var_b = posterior_sd(eb, fit.interval_level) ** 2
    gap_var = var_a + var_b
    if cov_ab is not None:
        gap_var = max(gap_var - 2.0 * cov_ab, 0.0)
    p = win_probability(ea.elo, eb.elo)
    return gap_var * p * (1.0 - p)


@dataclass
class SchedulerState:
    """Everything the scheduler needs between questions.

    Mutated only under exclusive access (the service serializes calls per
    study).  Build fresh instances with :func:`initial_state`.
    """

    config: StudyConfig
    current_fit: EloFit
    pair_counts: dict[tuple[str, str], int] = field(default_factory=dict)
    rater_states: dict[str, RaterState] = field(default_factory=dict)
    comparisons: list[Comparison] = field(default_factory=list)
    issued: dict[str, Question] = field(default_factory=dict)
    answered: set[str] = field(default_factory=set)
    recent_images: dict[str, deque[str]] = field(default_factory=dict)
    question_counter: int = 0
    answers_since_refresh: int = 0
    refit_count: int = 0

    # The knobs, surfaced from config for convenience.
    @property
    def golden_rate(self) -> float:
        return self.config.golden.rate

    @property
    def golden_threshold(self) -> int:
        return self.config.golden.threshold

    @property
    def refresh_every(self) -> int:
        return self.config.scheduler.refresh_every

    @property
    def repeat_window(self) -> int:
        return self.config.scheduler.repeat_window

    @property
    def rng_seed(self) -> int:
        return self.config.scheduler.seed

    def pair_count(self, a: str, b: str) -> int:
        return self.pair_counts.get(_pair_key(a, b), 0)

    def rater(self, rater_id: str) -> RaterState:
        if rater_id not in self.rater_states:
            self.rater_states[rater_id] = RaterState(rater=rater_id)
        return self.rater_states[rater_id]

    def refit_due(self) -> bool:
        return self.answers_since_refresh >= self.refresh_every


def initial_state(config: StudyConfig, fit: EloFit | None = None) -> SchedulerState:
    """Scheduler state before any answers; the fit is prior-only."""
    if fit is None:
        fit = fit_map([], priors=config.priors, settings=config.fitter,
                      methods=config.method_ids(),
                      config_fingerprint=config.fingerprint())
    return SchedulerState(config=config, current_fit=fit)


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def _question_rng(state: SchedulerState) -> random.Random:
    return random.Random(f"{state.rng_seed}:{state.question_counter}")


def _pick_image(state: SchedulerState, rater_id: str, rng: random.Random) -> str:
    images = [img.id for img in state.config.images]
    if not images:
        raise NoEligibleImageError("study has no images configured")
    recent = state.recent_images.get(rater_id, ())
    eligible = [i for i in images if i not in recent]
    if not eligible:
        raise NoEligibleImageError(
            f"no image outside the last-{state.repeat_window} window for rater {rater_id!r}"
        )
    return rng.choice(eligible)


def best_pair(state: SchedulerState) -> tuple[str, str]:
    """Highest pair_score; ties broken by fewest prior answers, then by id."""
    fit = state.current_fit
    methods = sorted(e.method for e in fit.estimates)
    if len(methods) < 2:
        raise UnknownMethodError("need at least two methods to schedule a pair")
    return min(
        combinations(methods, 2),
        key=lambda pr: (-pair_score(pr, fit), state.pair_count(*pr), pr),
    )


def next_question(rater_id: str, state: SchedulerState, now: float = 0.0) -> Question:
    """Issue the next question for a rater.

    Golden with probability g, else the most informative pair.  Sides are
    randomized.  The image is drawn uniformly from those the rater has not
    seen within the repeat window (golden questions included, so a rater
    never studies one image twice in quick succession either way).
    """
    rs = state.rater(rater_id)
    if rs.blocked:
        raise BlockedRaterError(f"rater {rater_id!r} is blocked")

    rng = _question_rng(state)
    golden = rng.random() < state.golden_rate
    image = _pick_image(state, rater_id, rng)
    if golden:
        sides = [ORIGINAL, heavy_degraded_id(state.config.golden.heavy_quality)]
    else:
        sides = list(best_pair(state))
    if rng.random() < 0.5:
        sides.reverse()

    question = Question(
        id=f"q{state.question_counter:06d}",
        image=image,
        left=sides[0],
        right=sides[1],
        golden=golden,
        rater=rater_id,
        issued_at=now,
    )
    state.issued[question.id] = question
    state.question_counter += 1
    if state.repeat_window > 0:
        window = state.recent_images.setdefault(
            rater_id, deque(maxlen=state.repeat_window))
        window.append(image)
    if golden:
        rs.golden_shown += 1
    return question


def _to_comparison(question: Question, answer: Answer) -> Comparison:
    if question.golden:
        # Normalize so left is the original; flip the choice alongside.
        if question.left == ORIGINAL:
            left, right, choice = question.left, question.right, answer.choice
        else:
            left, right = question.right, question.left
            choice = "left" if answer.choice == "right" else "right"
    else:
        left, right, choice = question.left, question.right, answer.choice
    return Comparison(
        rater=answer.rater, left=left, right=right, choice=choice,
        golden=question.golden, image=question.image, toggles=answer.toggles,
    )


def record_answer(answer: Answer, state: SchedulerState, refit: bool = True) -> SchedulerState:
    """Fold one answer into the state.

    Updates pair counts and gating, stores the normalized comparison, and
    refits the model at every ``refresh_every``-answer checkpoint (pass
    ``refit=False`` to manage refits externally; ``state.refit_due()``
    reports when one is owed).
    """
    question = state.issued.get(answer.question)
    if question is None:
        raise UnknownQuestionError(f"unknown question {answer.question!r}")
    if answer.question in state.answered:
        raise DuplicateAnswerError(f"question {answer.question!r} already answered")
    if answer.rater != question.rater:
        raise UnknownQuestionError(
            f"question {answer.question!r} was issued to {question.rater!r}, "
            f"not {answer.rater!r}"
        )

    comparison = _to_comparison(question, answer)
    state.answered.add(answer.question)
    state.comparisons.append(comparison)

    rs = state.rater(answer.rater)
    rs.answers_given += 1
    if question.golden:
        if comparison.choice != "left":
            rs.golden_wrong += 1
            if rs.golden_wrong >= state.golden_threshold:
                rs.blocked = True
    else:
        key = _pair_key(question.left, question.right)
        state.pair_counts[key] = state.pair_counts.get(key, 0) + 1

    state.answers_since_refresh += 1
    if refit and state.refit_due():
        refresh_fit(state)
    return state


def refresh_fit(state: SchedulerState) -> EloFit:
    """Refit from all answers so far (warm-started) and install the result."""
    state.current_fit = fit_map(
        state.comparisons,
        priors=state.config.priors,
        settings=state.config.fitter,
        methods=state.config.method_ids(),
        warm_start=state.current_fit,
        config_fingerprint=state.config.fingerprint(),
    )
    state.answers_since_refresh = 0
    state.refit_count += 1
    return state.current_fit
