"""Durable study state.

A study's full history lives in an append-only JSONL event log: one
``rater`` record per registration, one ``question`` record per issued
question, one ``answer`` record per accepted answer.  The in-memory
:class:`StudyStore` is a pure fold of the scheduler's transition
functions over (config, log), so restarting a crashed study and
replaying the log reproduces the exact scheduler state, including the
deterministic per-question RNG stream and checkpoint refits.

Every event is fsynced before the caller is acknowledged: an ack means
the record survives a crash.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from pathlib import Path
from typing import Any, Callable

from . import scheduler
from .analysis import (
    EquivalentQualityTable,
    build_ladder,
    equivalent_quality_table,
    family_sort_key,
)
from .domain import (
    Answer,
    EloFit,
    Question,
    RaterState,
    StudyConfig,
    validate_study_config,
)
from .errors import (
    BlockedRaterError,
    ConfigError,
    DuplicateAnswerError,
    FitUnavailableError,
    OutstandingQuestionError,
    ReplayError,
    UnknownRaterError,
    UnknownTokenError,
)

DEFAULT_LEASE_SECONDS = 600.0

_QUESTION_FIELDS = ("id", "image", "left", "right", "golden", "rater", "issued_at")


def variant_token(seed: int, question_id: str, side: str) -> str:
    """Opaque label for one side of a question's image pair.

    Deterministic in (seed, question, side) so replayed questions resolve
    to the same URLs, but unguessable without the seed: the token never
    reveals the method behind it.
    """
    digest = hashlib.sha256(f"{seed}:{question_id}:{side}".encode())
    return digest.hexdigest()[:16]


class EventLog:
    """Append-only JSONL file; one event per line, fsynced per append."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, record: dict[str, Any]) -> None:
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()

    @staticmethod
    def read(path: str | Path) -> list[dict[str, Any]]:
        events = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    events.append(json.loads(line))
                except json.JSONDecodeError as err:
                    raise ReplayError(f"{path}:{lineno}: bad event record: {err}")
        return events


class StudyStore:
    """One study's live state plus its durable log.

    All mutations are serialized through an internal lock; the HTTP layer
    can stay concurrent.  Opening a store on an existing log replays it;
    opening on a fresh path starts a new study and stamps the log with the
    config fingerprint so later restarts refuse a mismatched config.
    """

    def __init__(
        self,
        config: StudyConfig | dict[str, Any],
        log_path: str | Path,
        *,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        clock: Callable[[], float] = time.time,
    ):
        self.config = validate_study_config(config)
        self.lease_seconds = float(lease_seconds)
        self.clock = clock
        self._lock = threading.RLock()

        self.registered: set[str] = set()
        #: rater -> (question id, lease expiry)
        self.outstanding: dict[str, tuple[str, float]] = {}
        #: answered question id -> idempotency token supplied with it
        self.answer_tokens: dict[str, str | None] = {}
        #: opaque variant token -> (image id, side reference)
        self._variants: dict[str, tuple[str, str]] = {}
        #: answered_at of the checkpoint answer behind the current fit
        self.last_fit_at: float | None = None

        self.state = scheduler.initial_state(self.config)
        path = Path(log_path)
        existing = EventLog.read(path) if path.exists() else []
        self.log = EventLog(path)
        if existing:
            self._replay(existing)
        else:
            self.log.append({"type": "config",
                             "fingerprint": self.config.fingerprint()})

    # -- lifecycle -------------------------------------------------------

    def close(self) -> None:
        self.log.close()

    def _replay(self, events: list[dict[str, Any]]) -> None:
        head = events[0]
        if head.get("type") != "config":
            raise ReplayError("log does not start with a config record")
        if head.get("fingerprint") != self.config.fingerprint():
            raise ReplayError(
                "log was written under a different study config "
                f"(log {head.get('fingerprint')!r}, "
                f"current {self.config.fingerprint()!r})"
            )
        for ev in events[1:]:
            kind = ev.get("type")
            if kind == "rater":
                self.registered.add(ev["rater"])
                self.state.rater(ev["rater"])
            elif kind == "question":
                replayed = scheduler.next_question(
                    ev["rater"], self.state, now=ev["issued_at"])
                logged = {k: ev[k] for k in _QUESTION_FIELDS}
                if replayed.to_dict() != logged:
                    raise ReplayError(
                        f"question {ev['id']!r} does not replay: the log and "
                        "the scheduler disagree (was the log edited or the "
                        "seed changed?)"
                    )
                self._install_question(replayed)
            elif kind == "answer":
                answer = Answer(
                    question=ev["question"], rater=ev["rater"],
                    choice=ev["choice"], answered_at=ev["answered_at"],
                    toggles=ev.get("toggles", 0),
                )
                self._apply_answer(answer)
                self._settle_answer(answer, ev.get("token"))
            else:
                raise ReplayError(f"unknown event type {kind!r}")

    def _install_question(self, question: Question) -> None:
        self.outstanding[question.rater] = (
            question.id, question.issued_at + self.lease_seconds)
        seed = self.config.scheduler.seed
        for side in ("left", "right"):
            token = variant_token(seed, question.id, side)
            self._variants[token] = (question.image, getattr(question, side))

    def _apply_answer(self, answer: Answer) -> None:
        before = self.state.refit_count
        scheduler.record_answer(answer, self.state)
        if self.state.refit_count > before:
            self.last_fit_at = answer.answered_at

    def _settle_answer(self, answer: Answer, token: str | None) -> None:
        self.answer_tokens[answer.question] = token
        held = self.outstanding.get(answer.rater)
        if held is not None and held[0] == answer.question:
            del self.outstanding[answer.rater]

    # -- operations ------------------------------------------------------

    def register_rater(self, rater_id: str) -> RaterState:
        """Register a rater (idempotent); logs only the first time."""
        if not isinstance(rater_id, str) or not rater_id.strip():
            raise ConfigError("rater id must be a non-empty string")
        with self._lock:
            if rater_id not in self.registered:
                self.log.append({"type": "rater", "rater": rater_id})
                self.registered.add(rater_id)
            return self.state.rater(rater_id)

    def is_registered(self, rater_id: str) -> bool:
        return rater_id in self.registered

    def next_question(self, rater_id: str,
                      now: float | None = None) -> tuple[Question, float]:
        """Issue (or re-serve) the rater's question; returns (question, lease expiry).

        An unanswered question within its lease blocks new issuance; once
        the lease lapses the same question is served again under a fresh
        lease, so an abandoned tab never strands a question.
        """
        with self._lock:
            if rater_id not in self.registered:
                raise UnknownRaterError(f"unknown rater {rater_id!r}")
            if now is None:
                now = self.clock()
            rater = self.state.rater(rater_id)
            if rater.blocked:
                raise BlockedRaterError(f"rater {rater_id!r} is blocked")
            held = self.outstanding.get(rater_id)
            if held is not None:
                question_id, expires = held
                if now < expires:
                    raise OutstandingQuestionError(
                        f"rater {rater_id!r} already holds question "
                        f"{question_id!r}"
                    )
                expires = now + self.lease_seconds
                self.outstanding[rater_id] = (question_id, expires)
                return self.state.issued[question_id], expires

            question = scheduler.next_question(rater_id, self.state, now=now)
            self.log.append({"type": "question", **question.to_dict()})
            self._install_question(question)
            return question, now + self.lease_seconds

    def submit_answer(
        self,
        question_id: str,
        rater_id: str,
        choice: str,
        *,
        toggles: int = 0,
        token: str | None = None,
        now: float | None = None,
    ) -> dict[str, Any]:
        """Record one answer; the ack is durable before it is returned.

        Resubmitting with the token of the accepted answer returns the
        same ack (safe client retries); any other resubmission is a
        duplicate.
        """
        with self._lock:
            if rater_id not in self.registered:
                raise UnknownRaterError(f"unknown rater {rater_id!r}")
            if now is None:
                now = self.clock()
            if question_id in self.answer_tokens:
                accepted = self.answer_tokens[question_id]
                if token is not None and token == accepted:
                    return self._ack(question_id, rater_id)
                raise DuplicateAnswerError(
                    f"question {question_id!r} already answered")

            answer = Answer(question=question_id, rater=rater_id,
                            choice=choice, answered_at=now, toggles=toggles)
            self._apply_answer(answer)
            self.log.append({"type": "answer", **answer.to_dict(),
                             "token": token})
            self._settle_answer(answer, token)
            return self._ack(question_id, rater_id)

    def _ack(self, question_id: str, rater_id: str) -> dict[str, Any]:
        rater = self.state.rater(rater_id)
        return {
            "question": question_id,
            "rater": rater_id,
            "blocked": rater.blocked,
            "answers": rater.answers_given,
        }

    # -- reads -----------------------------------------------------------

    @property
    def total_answers(self) -> int:
        return len(self.state.comparisons)

    def results(self) -> EloFit | None:
        """The latest data-driven fit, or None before the first refit."""
        with self._lock:
            if self.state.refit_count == 0:
                return None
            return self.state.current_fit

    def resolve_variant(self, token: str) -> tuple[str, str]:
        """Map an opaque variant token back to (image id, side reference)."""
        try:
            return self._variants[token]
        except KeyError:
            raise UnknownTokenError(f"unknown variant token {token!r}")

    def equivalent_quality(
        self, anchor: str | None = None
    ) -> EquivalentQualityTable:
        """Cross-family bitrate table at the anchor family's quality levels.

        Needs a data-driven fit and per-method mean bitrates in the config.
        Dominated points are pareto-filtered per family so a noisy interim
        fit still yields usable ladders.
        """
        fit = self.results()
        if fit is None:
            raise FitUnavailableError("no fit computed yet")
        points: dict[str, list[tuple[str, float, float]]] = {}
        for method in self.config.methods:
            if method.mean_bpp is None:
                continue
            points.setdefault(method.encoder, []).append(
                (method.id, fit.elo_of(method.id), method.mean_bpp))
        ladders = {
            family: build_ladder(pts, family=family, pareto=True)
            for family, pts in sorted(points.items())
            if len(pts) >= 2
        }
        if not ladders:
            raise ConfigError(
                "no family has two or more methods with mean_bpp set")
        if anchor is None:
            anchor = ("libjpeg-turbo" if "libjpeg-turbo" in ladders
                      else sorted(ladders)[0])
        if anchor not in ladders:
            raise ConfigError(f"anchor family {anchor!r} has no ladder")
        others = [ladders[f] for f in sorted(ladders, key=family_sort_key)
                  if f != anchor]
        return equivalent_quality_table(ladders[anchor], others)
