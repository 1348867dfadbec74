"""Store and HTTP-layer tests: durability, replay, leases, blinding."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from pairelo.domain import ORIGINAL, validate_study_config
from pairelo.errors import (
    DuplicateAnswerError,
    OutstandingQuestionError,
    ReplayError,
    UnknownRaterError,
)
from pairelo.ingestion import CorpusEntry, CorpusManifest
from pairelo.service import create_app
from pairelo.study import EventLog, StudyStore


def make_config(n_methods=3, n_images=4, seed=0, refresh_every=50,
                golden_rate=0.1, mean_bpp=None, image_paths=None, **extra):
    methods = []
    for i in range(n_methods):
        m = {"id": f"jpegli-q{60 + 5 * i}-yuv444"}
        if mean_bpp is not None:
            m["mean_bpp"] = mean_bpp[i]
        methods.append(m)
    images = []
    for i in range(n_images):
        img = {"id": f"img{i:02d}", "width": 64, "height": 48}
        if image_paths is not None:
            img["source_path"] = image_paths[i]
        images.append(img)
    raw = {
        "methods": methods,
        "images": images,
        "scheduler": {"seed": seed, "refresh_every": refresh_every},
        "golden": {"rate": golden_rate},
        **extra,
    }
    return validate_study_config(raw)


class FakeClock:
    def __init__(self, t=1000.0):
        self.t = t

    def __call__(self):
        return self.t


def drain_one(store, rater, choice="left", token=None):
    """Issue and answer one question for a rater; returns (question, ack)."""
    question, _ = store.next_question(rater)
    ack = store.submit_answer(question.id, rater, choice, token=token)
    return question, ack


class TestStudyStore:
    def test_fresh_log_has_config_header(self, tmp_path):
        store = StudyStore(make_config(), tmp_path / "log.jsonl")
        events = EventLog.read(tmp_path / "log.jsonl")
        assert events[0]["type"] == "config"
        assert events[0]["fingerprint"] == store.config.fingerprint()

    def test_register_is_idempotent_and_logged_once(self, tmp_path):
        store = StudyStore(make_config(), tmp_path / "log.jsonl")
        store.register_rater("r1")
        store.register_rater("r1")
        events = EventLog.read(tmp_path / "log.jsonl")
        assert sum(e["type"] == "rater" for e in events) == 1

    def test_unknown_rater(self, tmp_path):
        store = StudyStore(make_config(), tmp_path / "log.jsonl")
        with pytest.raises(UnknownRaterError):
            store.next_question("ghost")
        with pytest.raises(UnknownRaterError):
            store.submit_answer("q000000", "ghost", "left")

    def test_outstanding_question_blocks_reissue(self, tmp_path):
        store = StudyStore(make_config(), tmp_path / "log.jsonl")
        store.register_rater("r1")
        store.next_question("r1")
        with pytest.raises(OutstandingQuestionError):
            store.next_question("r1")

    def test_lease_expiry_reserves_same_question(self, tmp_path):
        clock = FakeClock()
        store = StudyStore(make_config(), tmp_path / "log.jsonl",
                           lease_seconds=60, clock=clock)
        store.register_rater("r1")
        q1, exp1 = store.next_question("r1")
        assert exp1 == clock.t + 60
        clock.t += 61
        q2, exp2 = store.next_question("r1")
        assert q2 is q1 and exp2 == clock.t + 60
        events = EventLog.read(tmp_path / "log.jsonl")
        assert sum(e["type"] == "question" for e in events) == 1

    def test_answer_allowed_after_lease_expiry(self, tmp_path):
        clock = FakeClock()
        store = StudyStore(make_config(), tmp_path / "log.jsonl",
                           lease_seconds=60, clock=clock)
        store.register_rater("r1")
        question, _ = store.next_question("r1")
        clock.t += 3600
        ack = store.submit_answer(question.id, "r1", "left")
        assert ack["answers"] == 1
        store.next_question("r1")  # slot is free again

    def test_idempotency_token_replays_ack(self, tmp_path):
        store = StudyStore(make_config(), tmp_path / "log.jsonl")
        store.register_rater("r1")
        question, ack = drain_one(store, "r1", token="tok-1")
        again = store.submit_answer(question.id, "r1", "left", token="tok-1")
        assert again == ack
        with pytest.raises(DuplicateAnswerError):
            store.submit_answer(question.id, "r1", "left", token="tok-2")
        with pytest.raises(DuplicateAnswerError):
            store.submit_answer(question.id, "r1", "left")
        events = EventLog.read(tmp_path / "log.jsonl")
        assert sum(e["type"] == "answer" for e in events) == 1

    def test_results_gated_on_first_refit(self, tmp_path):
        store = StudyStore(make_config(refresh_every=5, golden_rate=0.0),
                           tmp_path / "log.jsonl")
        store.register_rater("r1")
        assert store.results() is None
        for _ in range(5):
            drain_one(store, "r1")
        fit = store.results()
        assert fit is not None and fit.n_answers == 5
        assert store.last_fit_at is not None

    def test_crash_replay_equivalence(self, tmp_path):
        config = make_config(seed=7, refresh_every=10, golden_rate=0.3)
        log = tmp_path / "log.jsonl"
        store = StudyStore(config, log)
        for r in ("r1", "r2", "r3"):
            store.register_rater(r)
        rng_choices = ["left", "right", "left", "left", "right"] * 9
        for i in range(45):
            rater = f"r{i % 3 + 1}"
            drain_one(store, rater, rng_choices[i], token=f"t{i}")
        # r1 holds an outstanding question across the "crash"
        pending, _ = store.next_question("r1")

        replayed = StudyStore(config, log)
        assert replayed.state.comparisons == store.state.comparisons
        assert replayed.state.pair_counts == store.state.pair_counts
        assert replayed.state.rater_states == store.state.rater_states
        assert replayed.state.question_counter == store.state.question_counter
        assert replayed.state.current_fit.estimates == store.state.current_fit.estimates
        assert replayed.state.current_fit.rater_noise == store.state.current_fit.rater_noise
        assert replayed.answer_tokens == store.answer_tokens
        assert replayed.last_fit_at == store.last_fit_at
        assert replayed.outstanding["r1"][0] == pending.id

        # the next question for every rater is identical after replay
        # (issued_at is wall clock, not scheduler state)
        for rater in ("r2", "r3"):
            q_live, _ = store.next_question(rater)
            q_back, _ = replayed.next_question(rater)
            live, back = q_live.to_dict(), q_back.to_dict()
            live.pop("issued_at"), back.pop("issued_at")
            assert live == back

    def test_replay_rejects_changed_config(self, tmp_path):
        log = tmp_path / "log.jsonl"
        StudyStore(make_config(seed=1), log).close()
        with pytest.raises(ReplayError):
            StudyStore(make_config(seed=2), log)

    def test_replay_rejects_tampered_question(self, tmp_path):
        config = make_config()
        log = tmp_path / "log.jsonl"
        store = StudyStore(config, log)
        store.register_rater("r1")
        store.next_question("r1")
        store.close()
        lines = log.read_text().splitlines()
        ev = json.loads(lines[-1])
        ev["left"], ev["right"] = ev["right"], ev["left"]
        lines[-1] = json.dumps(ev)
        log.write_text("\n".join(lines) + "\n")
        with pytest.raises(ReplayError):
            StudyStore(config, log)

    def test_equivalent_quality_report(self, tmp_path):
        raw = {
            "methods": [
                {"id": "jpegli-q60-yuv444", "mean_bpp": 0.9},
                {"id": "jpegli-q80-yuv444", "mean_bpp": 1.4},
                {"id": "mozjpeg-q70-yuv420", "mean_bpp": 1.0},
                {"id": "mozjpeg-q90-yuv444", "mean_bpp": 2.1},
            ],
            "images": [{"id": "img00", "width": 64, "height": 48}],
            "scheduler": {"seed": 0, "refresh_every": 8},
            "golden": {"rate": 0.0},
        }
        store = StudyStore(validate_study_config(raw), tmp_path / "log.jsonl")
        store.register_rater("r1")
        for _ in range(16):
            question, _ = store.next_question("r1")
            # prefer higher-quality ids so elo tracks quality
            better = max(question.left, question.right)
            store.submit_answer(question.id, "r1",
                                "left" if question.left == better else "right")
        table = store.equivalent_quality()
        assert table.anchor_family == "jpegli"
        assert set(table.families) == {"jpegli", "mozjpeg"}
        assert len(table.rows) == 2


@pytest.fixture
def app_client(tmp_path):
    config = make_config(seed=11, refresh_every=6, golden_rate=0.0)
    store = StudyStore(config, tmp_path / "log.jsonl")
    client = TestClient(create_app(store), raise_server_exceptions=False)
    return client, store


def register(client, rater):
    return client.post("/raters", json={"rater": rater})


def answer_next(client, rater, choice="A", token=None):
    question = client.get("/questions/next", params={"rater": rater}).json()
    payload = {"question": question["question"], "rater": rater, "choice": choice}
    if token is not None:
        payload["token"] = token
    return question, client.post("/answers", json=payload)


class TestHttpContract:
    def test_healthz(self, app_client):
        client, _ = app_client
        body = client.get("/healthz").json()
        assert body["status"] == "ok" and body["answers"] == 0

    def test_register_codes(self, app_client):
        client, _ = app_client
        assert register(client, "r1").status_code == 201
        assert register(client, "r1").status_code == 200

    def test_unknown_rater_404(self, app_client):
        client, _ = app_client
        assert client.get("/questions/next", params={"rater": "ghost"}).status_code == 404

    def test_question_payload_shape(self, app_client):
        client, _ = app_client
        register(client, "r1")
        body = client.get("/questions/next", params={"rater": "r1"}).json()
        assert set(body) == {"question", "image", "original_url", "variants",
                             "lease_expires_at"}
        assert [v["label"] for v in body["variants"]] == ["A", "B"]
        assert all(v["url"].startswith("/images/variant/") for v in body["variants"])

    def test_outstanding_409(self, app_client):
        client, _ = app_client
        register(client, "r1")
        assert client.get("/questions/next", params={"rater": "r1"}).status_code == 200
        assert client.get("/questions/next", params={"rater": "r1"}).status_code == 409

    def test_answer_flow_and_duplicates(self, app_client):
        client, _ = app_client
        register(client, "r1")
        question, first = answer_next(client, "r1", token="tok")
        assert first.status_code == 200 and first.json()["blocked"] is False

        retry = client.post("/answers", json={
            "question": question["question"], "rater": "r1",
            "choice": "A", "token": "tok"})
        assert retry.status_code == 200 and retry.json() == first.json()

        dup = client.post("/answers", json={
            "question": question["question"], "rater": "r1", "choice": "A"})
        assert dup.status_code == 409

    def test_invalid_choice_400(self, app_client):
        client, _ = app_client
        register(client, "r1")
        question = client.get("/questions/next", params={"rater": "r1"}).json()
        bad = client.post("/answers", json={
            "question": question["question"], "rater": "r1", "choice": "left"})
        assert bad.status_code == 400

    def test_unknown_question_404(self, app_client):
        client, _ = app_client
        register(client, "r1")
        missing = client.post("/answers", json={
            "question": "q999999", "rater": "r1", "choice": "A"})
        assert missing.status_code == 404

    def test_cross_rater_submission_404(self, app_client):
        client, _ = app_client
        register(client, "r1")
        register(client, "r2")
        question = client.get("/questions/next", params={"rater": "r1"}).json()
        stolen = client.post("/answers", json={
            "question": question["question"], "rater": "r2", "choice": "A"})
        assert stolen.status_code == 404

    def test_results_503_then_snapshot(self, app_client):
        client, _ = app_client
        register(client, "r1")
        assert client.get("/results").status_code == 503
        for _ in range(6):
            answer_next(client, "r1")
        body = client.get("/results").json()
        assert body["n_answers"] == 6 and body["total_answers"] == 6
        assert {e["method"] for e in body["estimates"]} == {
            "jpegli-q60-yuv444", "jpegli-q65-yuv444", "jpegli-q70-yuv444"}
        assert body["fitted_at"] is not None


class TestGatingEndToEnd:
    def test_third_wrong_golden_blocks(self, tmp_path):
        config = make_config(seed=3, golden_rate=1.0)
        store = StudyStore(config, tmp_path / "log.jsonl")
        client = TestClient(create_app(store), raise_server_exceptions=False)
        register(client, "r1")

        acks = []
        for _ in range(3):
            question = client.get("/questions/next", params={"rater": "r1"}).json()
            # pick the degraded side on purpose: the original is whichever
            # side the store says it is (white box, never in the payload)
            issued = store.state.issued[question["question"]]
            wrong = "A" if issued.left != ORIGINAL else "B"
            acks.append(client.post("/answers", json={
                "question": question["question"], "rater": "r1",
                "choice": wrong}).json())
        assert [a["blocked"] for a in acks] == [False, False, True]
        assert client.get("/questions/next", params={"rater": "r1"}).status_code == 403
        assert register(client, "r1").json()["blocked"] is True


def walk_strings(node):
    if isinstance(node, dict):
        for k, v in node.items():
            yield str(k)
            yield from walk_strings(v)
    elif isinstance(node, (list, tuple)):
        for v in node:
            yield from walk_strings(v)
    elif isinstance(node, str):
        yield node


def shape_of(node):
    """Recursive schema skeleton: keys and container kinds, no values."""
    if isinstance(node, dict):
        return {k: shape_of(v) for k, v in sorted(node.items())}
    if isinstance(node, list):
        return [shape_of(v) for v in node]
    return type(node).__name__


class TestBlinding:
    def run_session(self, tmp_path, n_answers=40):
        config = make_config(seed=5, refresh_every=10, golden_rate=0.5)
        store = StudyStore(config, tmp_path / "log.jsonl")
        client = TestClient(create_app(store), raise_server_exceptions=False)
        traffic = [("/raters", register(client, "r1").json())]
        payloads = {}
        for i in range(n_answers):
            resp = client.get("/questions/next", params={"rater": "r1"})
            body = resp.json()
            traffic.append(("/questions/next", body))
            payloads[body["question"]] = body
            # stay unblocked: answer goldens correctly via white-box lookup
            issued = store.state.issued[body["question"]]
            choice = "A" if not issued.golden or issued.left == ORIGINAL else "B"
            ack = client.post("/answers", json={
                "question": body["question"], "rater": "r1", "choice": choice,
                "token": f"t{i}"})
            traffic.append(("/answers", ack.json()))
        traffic.append(("/healthz", client.get("/healthz").json()))
        return store, traffic, payloads

    def test_no_method_ids_or_golden_flags_in_rater_traffic(self, tmp_path):
        store, traffic, _ = self.run_session(tmp_path)
        method_ids = set(store.config.method_ids())
        forbidden = method_ids | {"golden", "degraded", "jpegli"}
        for path, body in traffic:
            for s in walk_strings(body):
                for bad in forbidden:
                    assert bad not in s, f"{path} leaked {bad!r} in {s!r}"

    def test_golden_payload_shape_matches_normal(self, tmp_path):
        store, _, payloads = self.run_session(tmp_path)
        golden_shapes = set()
        normal_shapes = set()
        for qid, body in payloads.items():
            shape = json.dumps(shape_of(body), sort_keys=True)
            if store.state.issued[qid].golden:
                golden_shapes.add(shape)
            else:
                normal_shapes.add(shape)
        assert golden_shapes and normal_shapes
        assert golden_shapes == normal_shapes

    def test_variant_tokens_unique_per_question(self, tmp_path):
        _, _, payloads = self.run_session(tmp_path, n_answers=20)
        seen = set()
        for body in payloads.values():
            for v in body["variants"]:
                assert v["url"] not in seen
                seen.add(v["url"])


class TestStaticImages:
    def build(self, tmp_path):
        originals = []
        for i in range(2):
            p = tmp_path / f"src{i}.png"
            p.write_bytes(b"PNGDATA" + bytes([i]))
            originals.append(str(p))
        config = make_config(n_images=2, image_paths=originals,
                             golden_rate=0.0, seed=2)
        entries = []
        for img in config.images:
            for m in config.methods:
                p = tmp_path / f"{img.id}-{m.id}.jpeg"
                p.write_bytes(f"JPEG {img.id} {m.id}".encode())
                entries.append(CorpusEntry(img.id, m.id, str(p),
                                           p.stat().st_size, 1.0))
        manifest = CorpusManifest(images=list(config.images),
                                  methods=list(config.methods),
                                  entries=entries)
        store = StudyStore(config, tmp_path / "log.jsonl")
        client = TestClient(create_app(store, corpus=manifest),
                            raise_server_exceptions=False)
        return client, store

    def test_variant_urls_serve_the_right_files(self, tmp_path):
        client, store = self.build(tmp_path)
        register(client, "r1")
        body = client.get("/questions/next", params={"rater": "r1"}).json()
        issued = store.state.issued[body["question"]]

        original = client.get(body["original_url"])
        assert original.status_code == 200
        assert original.content.startswith(b"PNGDATA")

        for v, side in zip(body["variants"], ("left", "right")):
            resp = client.get(v["url"])
            assert resp.status_code == 200
            expected = f"JPEG {issued.image} {getattr(issued, side)}".encode()
            assert resp.content == expected

    def test_unknown_token_404(self, tmp_path):
        client, _ = self.build(tmp_path)
        assert client.get("/images/variant/deadbeef").status_code == 404

    def test_variant_without_corpus_404(self, tmp_path):
        config = make_config(golden_rate=0.0)
        store = StudyStore(config, tmp_path / "log.jsonl")
        client = TestClient(create_app(store), raise_server_exceptions=False)
        register(client, "r1")
        body = client.get("/questions/next", params={"rater": "r1"}).json()
        assert client.get(body["variants"][0]["url"]).status_code == 404


class TestReportEndpoint:
    def test_report_flow(self, tmp_path):
        raw = {
            "methods": [
                {"id": "jpegli-q60-yuv444", "mean_bpp": 0.9},
                {"id": "jpegli-q80-yuv444", "mean_bpp": 1.4},
                {"id": "mozjpeg-q70-yuv420", "mean_bpp": 1.0},
                {"id": "mozjpeg-q90-yuv444", "mean_bpp": 2.1},
            ],
            "images": [{"id": "img00", "width": 64, "height": 48}],
            "scheduler": {"seed": 0, "refresh_every": 8},
            "golden": {"rate": 0.0},
        }
        store = StudyStore(validate_study_config(raw), tmp_path / "log.jsonl")
        client = TestClient(create_app(store), raise_server_exceptions=False)
        register(client, "r1")
        assert client.get("/reports/equivalent-quality").status_code == 503
        for _ in range(8):
            question = client.get("/questions/next",
                                  params={"rater": "r1"}).json()
            issued = store.state.issued[question["question"]]
            better = max(issued.left, issued.right)
            choice = "A" if issued.left == better else "B"
            client.post("/answers", json={
                "question": question["question"], "rater": "r1",
                "choice": choice})
        body = client.get("/reports/equivalent-quality").json()
        assert body["anchor"] == "jpegli"
        assert body["columns"][0] == "jpegli_equiv_quality"
        text = client.get("/reports/equivalent-quality",
                          params={"format": "text"}).text
        assert text.splitlines()[0].startswith("jpegli_equiv_quality,elo")
        assert client.get("/reports/equivalent-quality",
                          params={"anchor": "nope"}).status_code == 400
