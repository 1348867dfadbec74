"""HTTP front end for a running study.

Raters only ever see blinded payloads: variants are labeled "A"/"B" and
fetched through opaque tokens, so no response on the rater-facing paths
(/raters, /questions/next, /answers, /images/...) carries a method id or
a golden flag.  Operator endpoints (/results, /reports/...) do expose
method ids; raters have no business calling them, and the test suite's
blinding scan covers exactly the rater-facing set.

The app is a thin translation layer: domain errors map to status codes,
all state changes go through :class:`~pairelo.study.StudyStore`, which
serializes writers and fsyncs the event log before any ack.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .domain import ORIGINAL, Question
from .errors import (
    BlockedRaterError,
    ConfigError,
    DuplicateAnswerError,
    FitUnavailableError,
    NonMonotoneLadderError,
    OutstandingQuestionError,
    UnknownQuestionError,
    UnknownRaterError,
    UnknownTokenError,
)
from .ingestion import CorpusManifest
from .study import StudyStore, variant_token

_STATUS = {
    UnknownRaterError: 404,
    UnknownQuestionError: 404,
    UnknownTokenError: 404,
    BlockedRaterError: 403,
    OutstandingQuestionError: 409,
    DuplicateAnswerError: 409,
    NonMonotoneLadderError: 409,
    FitUnavailableError: 503,
    ConfigError: 400,
}

_CHOICE_TO_SIDE = {"A": "left", "B": "right"}


class RegisterBody(BaseModel):
    rater: str = Field(min_length=1)


class AnswerBody(BaseModel):
    question: str
    rater: str
    choice: str
    toggles: int = 0
    token: str | None = None


def question_payload(question: Question, expires: float, seed: int) -> dict[str, Any]:
    """The blinded shape served to raters; identical for golden questions."""
    return {
        "question": question.id,
        "image": question.image,
        "original_url": f"/images/original/{question.image}",
        "variants": [
            {"label": "A",
             "url": f"/images/variant/{variant_token(seed, question.id, 'left')}"},
            {"label": "B",
             "url": f"/images/variant/{variant_token(seed, question.id, 'right')}"},
        ],
        "lease_expires_at": expires,
    }


def create_app(store: StudyStore, corpus: CorpusManifest | None = None) -> FastAPI:
    app = FastAPI(title="pairelo study service")
    app.state.store = store
    app.state.corpus = corpus
    seed = store.config.scheduler.seed
    images = {img.id: img for img in store.config.images}

    @app.exception_handler(Exception)
    async def domain_error(request: Request, exc: Exception):
        for kind, status in _STATUS.items():
            if isinstance(exc, kind):
                return JSONResponse(status_code=status,
                                    content={"error": str(exc)})
        raise exc

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {"status": "ok", "study": store.config.study,
                "answers": store.total_answers}

    @app.post("/raters")
    def register(body: RegisterBody) -> JSONResponse:
        known = store.is_registered(body.rater)
        rater = store.register_rater(body.rater)
        return JSONResponse(
            status_code=200 if known else 201,
            content={"rater": rater.rater, "blocked": rater.blocked,
                     "answers": rater.answers_given},
        )

    @app.get("/questions/next")
    def next_question(rater: str) -> dict[str, Any]:
        question, expires = store.next_question(rater)
        return question_payload(question, expires, seed)

    @app.post("/answers")
    def submit(body: AnswerBody) -> dict[str, Any]:
        side = _CHOICE_TO_SIDE.get(body.choice)
        if side is None or body.toggles < 0:
            return JSONResponse(
                status_code=400,
                content={"error": f"choice must be 'A' or 'B', got {body.choice!r}"},
            )
        return store.submit_answer(
            body.question, body.rater, side,
            toggles=body.toggles, token=body.token,
        )

    @app.get("/results")
    def results() -> dict[str, Any]:
        fit = store.results()
        if fit is None:
            raise FitUnavailableError("no fit computed yet")
        return {
            "fitted_at": store.last_fit_at,
            "n_answers": fit.n_answers,
            "total_answers": store.total_answers,
            "interval_level": fit.interval_level,
            "converged": fit.converged,
            "estimates": [e.to_dict() for e in fit.estimates],
            "rater_noise": fit.rater_noise,
            "reports": {"equivalent_quality": "/reports/equivalent-quality"},
        }

    @app.get("/reports/equivalent-quality")
    def equivalent_quality(anchor: str | None = None,
                           format: str = "json"):
        table = store.equivalent_quality(anchor)
        if format == "text":
            return PlainTextResponse(table.to_text())
        return {
            "anchor": table.anchor_family,
            "columns": list(table.column_names()),
            "rows": [
                [row.method, row.elo] +
                [row.bitrates[f] for f in table.families]
                for row in table.rows
            ],
        }

    def _serve_file(path: str | None, what: str):
        if not path or not Path(path).is_file():
            return JSONResponse(status_code=404,
                                content={"error": f"no file for {what}"})
        return FileResponse(path)

    @app.get("/images/original/{image_id}")
    def original_image(image_id: str):
        image = images.get(image_id)
        if image is None:
            return JSONResponse(status_code=404,
                                content={"error": f"unknown image {image_id!r}"})
        return _serve_file(image.source_path, f"image {image_id!r}")

    @app.get("/images/variant/{token}")
    def variant_image(token: str):
        image_id, ref = store.resolve_variant(token)
        if ref == ORIGINAL:
            return original_image(image_id)
        manifest = app.state.corpus
        entry = manifest.entry_for(image_id, ref) if manifest is not None else None
        return _serve_file(entry.path if entry else None,
                           f"variant of {image_id!r}")

    return app
