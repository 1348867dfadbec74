"""Scheduler tests: pair scoring, golden injection, gating, determinism."""

from __future__ import annotations

import itertools
import random

import pytest

from pairelo.domain import (
    ORIGINAL,
    Answer,
    Comparison,
    EloEstimate,
    EloFit,
    StudyConfig,
    is_heavy_degraded,
    validate_study_config,
)
from pairelo.errors import (
    BlockedRaterError,
    DuplicateAnswerError,
    NoEligibleImageError,
    UnknownMethodError,
    UnknownQuestionError,
)
from pairelo.model import observed_choice_probability, win_probability
from pairelo.scheduler import (
    best_pair,
    initial_state,
    next_question,
    pair_score,
    record_answer,
    refresh_fit,
)

Z99 = 2.5758293035489004


def make_config(n_methods: int = 3, n_images: int = 20, **overrides) -> StudyConfig:
    raw = {
        "study": "test",
        "methods": [
            {"id": f"jpegli-q{60 + 5 * i}-yuv444"} for i in range(n_methods)
        ],
        "images": [
            {"id": f"img{i:02d}", "width": 100, "height": 100}
            for i in range(n_images)
        ],
    }
    raw.update(overrides)
    return validate_study_config(raw)


def toy_fit(elos_and_sds: dict[str, tuple[float, float]]) -> EloFit:
    estimates = [
        EloEstimate(m, elo, elo - Z99 * sd, elo + Z99 * sd)
        for m, (elo, sd) in sorted(elos_and_sds.items())
    ]
    return EloFit(estimates=estimates, rater_noise={}, log_posterior=0.0)


def answer_from_truth(question, true_elos, rng, noise=0.0):
    """Simulate a rater's forced choice given true quality scores."""
    if question.golden:
        p_left = 1.0 if question.left == ORIGINAL else 0.0
        p_left = observed_choice_probability(p_left, noise)
    else:
        p_left = observed_choice_probability(
            win_probability(true_elos[question.left], true_elos[question.right]), noise)
    choice = "left" if rng.random() < p_left else "right"
    return Answer(question=question.id, rater=question.rater, choice=choice)


class TestPairScore:
    def test_equal_elos_equal_sigma(self):
        fit = toy_fit({"a": (2000.0, 30.0), "b": (2000.0, 30.0)})
        # p = 1/2 so the outcome factor is 1/4: score = 2 sigma^2 / 4
        assert pair_score(("a", "b"), fit) == pytest.approx(30.0 ** 2 / 2, rel=1e-9)

    def test_gap_four_hundred(self):
        fit = toy_fit({"a": (2200.0, 30.0), "b": (1800.0, 30.0)})
        want = 2 * 30.0 ** 2 * (10 / 11) * (1 / 11)
        assert pair_score(("a", "b"), fit) == pytest.approx(want, rel=1e-9)
        assert pair_score(("a", "b"), fit) < 30.0 ** 2 / 2

    def test_gap_eight_hundred_less_informative_than_even_match(self):
        fit = toy_fit({"a": (2400.0, 30.0), "b": (1600.0, 30.0)})
        want = 2 * 30.0 ** 2 * (100 / 101) * (1 / 101)
        assert pair_score(("a", "b"), fit) == pytest.approx(want, rel=1e-9)
        assert pair_score(("a", "b"), fit) < 30.0 ** 2 / 2

    def test_symmetric_in_pair_order(self):
        fit = toy_fit({"a": (2100.0, 20.0), "b": (1950.0, 45.0)})
        assert pair_score(("a", "b"), fit) == pytest.approx(pair_score(("b", "a"), fit))

    def test_unknown_method(self):
        fit = toy_fit({"a": (2000.0, 30.0)})
        with pytest.raises(UnknownMethodError):
            pair_score(("a", "ghost"), fit)

    def test_stored_covariance_shrinks_gap_variance(self):
        fit = toy_fit({"a": (2000.0, 30.0), "b": (2000.0, 30.0)})
        # without a covariance the score treats the elos as independent
        independent = pair_score(("a", "b"), fit)
        # a strong positive covariance means the pair moves together:
        # its gap is already pinned, so the answer is worth little
        fit.elo_cov = [[900.0, 800.0], [800.0, 900.0]]
        want = (900.0 + 900.0 - 2 * 800.0) * 0.25
        assert pair_score(("a", "b"), fit) == pytest.approx(want, rel=1e-9)
        assert pair_score(("a", "b"), fit) < independent
        assert pair_score(("a", "b"), fit) == pytest.approx(
            pair_score(("b", "a"), fit))

    def test_covariance_never_pushes_score_negative(self):
        fit = toy_fit({"a": (2000.0, 30.0), "b": (2000.0, 30.0)})
        # numerically sloppy covariance exceeding the variances clips at zero
        fit.elo_cov = [[900.0, 950.0], [950.0, 900.0]]
        assert pair_score(("a", "b"), fit) == 0.0

    def test_high_uncertainty_method_is_chosen(self):
        config = make_config(3)
        state = initial_state(config)
        ids = config.method_ids()
        state.current_fit = toy_fit({
            ids[0]: (2000.0, 50.0),
            ids[1]: (2001.0, 10.0),
            ids[2]: (1999.0, 10.0),
        })
        assert ids[0] in best_pair(state)


class TestNextQuestion:
    def test_deterministic_for_identical_state(self):
        q1 = next_question("r1", initial_state(make_config()))
        q2 = next_question("r1", initial_state(make_config()))
        assert q1 == q2

    def test_seed_changes_schedule(self):
        state_a = initial_state(make_config())
        state_b = initial_state(make_config(scheduler={"seed": 99}))
        seq_a = [next_question("r", state_a).image for _ in range(10)]
        seq_b = [next_question("r", state_b).image for _ in range(10)]
        assert seq_a != seq_b

    def test_two_method_study_always_serves_that_pair(self):
        config = make_config(2, golden={"rate": 0.0})
        state = initial_state(config)
        ids = set(config.method_ids())
        for _ in range(20):
            q = next_question("r", state)
            assert {q.left, q.right} == ids

    def test_blocked_rater_rejected(self):
        state = initial_state(make_config())
        state.rater("r").blocked = True
        with pytest.raises(BlockedRaterError):
            next_question("r", state)

    def test_golden_fraction_converges(self):
        config = make_config(2, n_images=200)
        state = initial_state(config)
        n = 1000
        golden = sum(next_question(f"r{i % 7}", state).golden for i in range(n))
        # binomial 3-sigma band around g = 0.1
        sigma = (0.1 * 0.9 / n) ** 0.5
        assert abs(golden / n - 0.1) <= 3 * sigma

    def test_side_randomization(self):
        config = make_config(2, n_images=200, golden={"rate": 0.0})
        state = initial_state(config)
        first = config.method_ids()[0]
        n = 800
        lefts = sum(next_question(f"r{i % 5}", state).left == first for i in range(n))
        sigma = (0.25 / n) ** 0.5
        assert abs(lefts / n - 0.5) <= 3 * sigma

    def test_golden_question_shape(self):
        config = make_config(3, golden={"rate": 1.0, "heavy_quality": 50})
        state = initial_state(config)
        q = next_question("r", state)
        assert q.golden
        sides = {q.left, q.right}
        assert ORIGINAL in sides
        assert any(is_heavy_degraded(s) for s in sides)

    def test_repeat_window_blocks_recent_images(self):
        config = make_config(2, n_images=5, scheduler={"repeat_window": 4})
        state = initial_state(config)
        seen = [next_question("r", state).image for _ in range(5)]
        assert len(set(seen)) == 5  # five questions, five distinct images

    def test_window_exhaustion_raises(self):
        config = make_config(2, n_images=3, scheduler={"repeat_window": 3})
        state = initial_state(config)
        for _ in range(3):
            next_question("r", state)
        with pytest.raises(NoEligibleImageError):
            next_question("r", state)

    def test_no_images_raises(self):
        config = make_config(2, n_images=0)
        state = initial_state(config)
        with pytest.raises(NoEligibleImageError):
            next_question("r", state)

    def test_windows_are_per_rater(self):
        config = make_config(2, n_images=3, scheduler={"repeat_window": 2})
        state = initial_state(config)
        for _ in range(3):
            next_question("alice", state)
        # alice's history must not constrain bob
        q = next_question("bob", state)
        assert q.rater == "bob"

    def test_question_ids_unique(self):
        state = initial_state(make_config())
        ids = [next_question("r", state).id for _ in range(50)]
        assert len(set(ids)) == 50

    def test_tie_break_prefers_fewest_answers_then_lexicographic(self):
        config = make_config(3, golden={"rate": 0.0})
        state = initial_state(config)
        ids = config.method_ids()
        # prior-only fit: all pairs tie on score; lexicographic first
        q = next_question("r", state)
        assert {q.left, q.right} == {ids[0], ids[1]}
        record_answer(Answer(question=q.id, rater="r", choice="left"),
                      state, refit=False)
        # (ids0, ids1) now has one answer; the other zero-count pairs win
        q2 = next_question("r", state)
        assert {q2.left, q2.right} == {ids[0], ids[2]}


class TestRecordAnswer:
    def _issue(self, state, rater="r"):
        return next_question(rater, state)

    def test_unknown_question(self):
        state = initial_state(make_config())
        with pytest.raises(UnknownQuestionError):
            record_answer(Answer(question="q999999", rater="r", choice="left"), state)

    def test_duplicate_answer(self):
        state = initial_state(make_config())
        q = self._issue(state)
        answer = Answer(question=q.id, rater="r", choice="left")
        record_answer(answer, state, refit=False)
        with pytest.raises(DuplicateAnswerError):
            record_answer(answer, state, refit=False)

    def test_wrong_rater_rejected(self):
        state = initial_state(make_config())
        q = self._issue(state, "alice")
        with pytest.raises(UnknownQuestionError):
            record_answer(Answer(question=q.id, rater="bob", choice="left"), state)

    def test_correct_golden_leaves_counter(self):
        config = make_config(2, golden={"rate": 1.0})
        state = initial_state(config)
        q = self._issue(state)
        correct = "left" if q.left == ORIGINAL else "right"
        record_answer(Answer(question=q.id, rater="r", choice=correct), state, refit=False)
        assert state.rater("r").golden_wrong == 0
        assert not state.rater("r").blocked

    def test_third_wrong_golden_blocks(self):
        config = make_config(2, golden={"rate": 1.0, "threshold": 3})
        state = initial_state(config)
        for i in range(3):
            q = self._issue(state)
            wrong = "right" if q.left == ORIGINAL else "left"
            record_answer(Answer(question=q.id, rater="r", choice=wrong), state, refit=False)
            assert state.rater("r").blocked == (i == 2)
        with pytest.raises(BlockedRaterError):
            next_question("r", state)

    def test_golden_answers_do_not_touch_pair_counts(self):
        config = make_config(2, golden={"rate": 1.0})
        state = initial_state(config)
        q = self._issue(state)
        record_answer(Answer(question=q.id, rater="r", choice="left"), state, refit=False)
        assert state.pair_counts == {}

    def test_refit_cadence_exact(self):
        config = make_config(2, n_images=300, golden={"rate": 0.1})
        state = initial_state(config)
        rng = random.Random(0)
        true = dict(zip(config.method_ids(), (1950.0, 2050.0)))
        for i in range(1000):
            q = next_question(f"r{i % 4}", state)
            record_answer(answer_from_truth(q, true, rng), state)
        assert state.refit_count == 20
        assert state.current_fit.n_answers == 1000

    def test_refit_false_defers(self):
        config = make_config(2, scheduler={"refresh_every": 5})
        state = initial_state(config)
        rng = random.Random(1)
        true = dict(zip(config.method_ids(), (1950.0, 2050.0)))
        for i in range(7):
            q = next_question("r", state)
            record_answer(answer_from_truth(q, true, rng), state, refit=False)
        assert state.refit_count == 0
        assert state.refit_due()
        refresh_fit(state)
        assert state.refit_count == 1
        assert not state.refit_due()


class TestTrajectoryProperties:
    def test_blocked_rater_never_served_again(self):
        config = make_config(3, n_images=100,
                             golden={"rate": 0.3, "threshold": 2})
        state = initial_state(config)
        rng = random.Random(2)
        true = {m: 2000.0 + 80 * i for i, m in enumerate(config.method_ids())}
        served_after_block: list[str] = []
        for i in range(400):
            rater = f"r{i % 6}"
            if state.rater(rater).blocked:
                with pytest.raises(BlockedRaterError):
                    next_question(rater, state)
                continue
            q = next_question(rater, state)
            served_after_block.append(rater)
            # noisy raters answer goldens randomly and get themselves blocked
            noise = 0.9 if rater in ("r0", "r1") else 0.0
            record_answer(answer_from_truth(q, true, rng, noise=noise), state)
        assert any(state.rater(f"r{k}").blocked for k in (0, 1))

    def test_under_sampled_method_gets_extra_attention(self):
        config = make_config(4, n_images=300, golden={"rate": 0.0})
        state = initial_state(config)
        ids = config.method_ids()
        fresh = ids[3]
        rng = random.Random(3)
        true = {m: 2000.0 for m in ids}
        # burn in: compare only the first three methods
        for k, (a, b) in enumerate(itertools.islice(itertools.cycle(
                itertools.combinations(ids[:3], 2)), 300)):
            state.comparisons.append(Comparison(
                rater=f"r{k % 3}", left=a, right=b,
                choice="left" if rng.random() < 0.5 else "right"))
        refresh_fit(state)
        touched = 0
        n = 200
        for i in range(n):
            q = next_question(f"r{i % 3}", state)
            if fresh in (q.left, q.right):
                touched += 1
            record_answer(answer_from_truth(q, true, rng), state)
        # uniform random pair choice would include the new method half the
        # time (3 of the 6 pairs); the scheduler must beat that
        assert touched / n > 0.5
