"""Session service tests over the HTTP surface."""

import concurrent.futures
import json

import pytest
from fastapi.testclient import TestClient

from intentloop.presets import load_presets
from intentloop.prompts import DefaultsRule, DefaultsTable
from intentloop.service import SessionService, create_app

GIRL_DOG_TABLE = DefaultsTable((DefaultsRule(
    match_categories=frozenset({"girl", "dog"}),
    add_relations=(("girl", "right_of", "dog"),),
),))


@pytest.fixture()
def service(tmp_path):
    return SessionService(tmp_path / "store", bundle=load_presets(),
                          defaults_table=GIRL_DOG_TABLE, seed=7)


@pytest.fixture()
def client(service):
    return TestClient(create_app(service))


class TestCreate:
    def test_zero_preset_satisfied_at_iteration_zero(self, client):
        r = client.post("/api/sessions",
                        json={"prompt": "a dog", "preset": "zero"})
        assert r.status_code == 201
        body = r.json()
        assert body["status"] == "satisfied"
        assert body["k"] == 0
        assert body["report"]["satisfied"]

    def test_scripted_prompt_starts_unsatisfied(self, client):
        r = client.post("/api/sessions", json={
            "prompt": "a girl and a dog", "preset": "scenario", "seed": 34})
        assert r.status_code == 201
        assert r.json()["status"] == "active"
        assert not r.json()["report"]["satisfied"]

    def test_malformed_prompt_400_with_position(self, client):
        r = client.post("/api/sessions",
                        json={"prompt": "a purple dog", "preset": "zero"})
        assert r.status_code == 400
        body = r.json()
        assert body["code"] == "grammar_error"
        assert body["detail"]["position"] == 1

    def test_unknown_preset_404(self, client):
        r = client.post("/api/sessions",
                        json={"prompt": "a dog", "preset": "nope"})
        assert r.status_code == 404
        assert r.json()["code"] == "unknown_preset"

    def test_seed_echoed(self, client):
        r = client.post("/api/sessions", json={
            "prompt": "a dog", "preset": "zero", "seed": 123})
        assert r.json()["seed"] == 123


class TestIterate:
    def create_scenario(self, client):
        r = client.post("/api/sessions", json={
            "prompt": "a girl and a dog", "preset": "scenario", "seed": 34})
        return r.json()

    def test_accepting_items_walks_to_satisfied(self, client):
        body = self.create_scenario(client)
        sid = body["session_id"]
        item_ids = [i["item_id"] for i in body["report"]["items"]
                    if i["severity"] == "error"]
        r = client.post(f"/api/sessions/{sid}/iterate",
                        json={"accepted_item_ids": item_ids})
        body = r.json()
        assert body["k"] == 1
        surplus = [i for i in body["report"]["items"] if i["severity"] == "error"]
        assert surplus[0]["kind"] == "numeracy"
        assert surplus[0]["observed"] == 2

        r = client.post(f"/api/sessions/{sid}/iterate", json={
            "accepted_item_ids": [surplus[0]["item_id"]]})
        assert r.json()["status"] == "satisfied"
        assert r.json()["k"] == 2

    def test_empty_body_is_pure_reroll(self, client):
        body = self.create_scenario(client)
        sid = body["session_id"]
        r = client.post(f"/api/sessions/{sid}/iterate", json={})
        assert r.status_code == 200
        assert r.json()["k"] == 1

    def test_unknown_item_rejected(self, client):
        sid = self.create_scenario(client)["session_id"]
        r = client.post(f"/api/sessions/{sid}/iterate",
                        json={"accepted_item_ids": ["numeracy:g9"]})
        assert r.status_code == 400
        assert r.json()["code"] == "unknown_item"

    def test_terminal_session_409(self, client):
        r = client.post("/api/sessions",
                        json={"prompt": "a dog", "preset": "zero"})
        sid = r.json()["session_id"]
        r = client.post(f"/api/sessions/{sid}/iterate", json={})
        assert r.status_code == 409
        assert r.json()["code"] == "session_terminal"

    def test_prompt_edit_goes_through(self, client):
        r = client.post("/api/sessions", json={
            "prompt": "a girl and a dog", "preset": "scenario", "seed": 34})
        sid = r.json()["session_id"]
        r = client.post(f"/api/sessions/{sid}/iterate", json={
            "prompt_edit": {"add_attributes": [["dog", "brown"]]}})
        assert r.status_code == 200
        assert "brown" in r.json()["canonical_prompt"]


class TestReadsAndDeletes:
    def test_get_echoes_canonical_prompt(self, client):
        r = client.post("/api/sessions", json={
            "prompt": "a girl and a dog", "preset": "zero"})
        sid = r.json()["session_id"]
        body = client.get(f"/api/sessions/{sid}").json()
        assert body["canonical_prompt"] == "a girl right_of a dog"

    def test_trace_of_satisfied_zero_session(self, client):
        r = client.post("/api/sessions", json={"prompt": "a dog",
                                               "preset": "zero"})
        sid = r.json()["session_id"]
        doc = client.get(f"/api/sessions/{sid}/trace").json()
        assert doc["schema"] == "trace_v1"
        assert doc["status"] == "satisfied"
        assert len(doc["iterations"]) == 1
        assert doc["final_eval"] == {"numeracy": True, "attribute": True,
                                     "spatial": True}

    def test_render_endpoint(self, client):
        r = client.post("/api/sessions", json={"prompt": "a dog",
                                               "preset": "zero"})
        sid = r.json()["session_id"]
        r = client.get(f"/api/sessions/{sid}/iterations/0/render.svg")
        assert r.status_code == 200
        assert r.headers["content-type"].startswith("image/svg+xml")
        assert r.text.startswith("<svg")
        assert client.get(
            f"/api/sessions/{sid}/iterations/5/render.svg").status_code == 404

    def test_delete_then_404(self, client):
        r = client.post("/api/sessions", json={"prompt": "a dog",
                                               "preset": "zero"})
        sid = r.json()["session_id"]
        assert client.delete(f"/api/sessions/{sid}").status_code == 204
        assert client.get(f"/api/sessions/{sid}").status_code == 404

    def test_presets_listing(self, client):
        names = client.get("/api/presets").json()["presets"]
        assert {"unconditioned", "conditioned", "refined"} <= set(names)


class TestDeterminismAndPersistence:
    def test_identical_inputs_identical_traces(self, client):
        traces = []
        for _ in range(2):
            r = client.post("/api/sessions", json={
                "prompt": "four dogs", "preset": "refined", "seed": 55})
            sid = r.json()["session_id"]
            while client.get(f"/api/sessions/{sid}").json()["status"] == "active":
                client.post(f"/api/sessions/{sid}/iterate", json={})
            doc = client.get(f"/api/sessions/{sid}/trace").json()
            traces.append(json.dumps(doc, sort_keys=True))
        assert traces[0] == traces[1]

    def test_store_reload_reproduces_sessions(self, tmp_path):
        store = tmp_path / "store"
        first = SessionService(store, bundle=load_presets(),
                               defaults_table=GIRL_DOG_TABLE, seed=7)
        client = TestClient(create_app(first))
        r = client.post("/api/sessions", json={
            "prompt": "a girl and a dog", "preset": "scenario", "seed": 34})
        sid = r.json()["session_id"]
        client.post(f"/api/sessions/{sid}/iterate",
                    json={"accepted_item_ids": ["numeracy:g0"]})
        before = client.get(f"/api/sessions/{sid}/trace").json()

        # simulate a crash: a fresh process loads the same directory
        second = SessionService(store, bundle=load_presets(),
                                defaults_table=GIRL_DOG_TABLE, seed=7)
        reloaded = TestClient(create_app(second))
        after = reloaded.get(f"/api/sessions/{sid}/trace").json()
        assert after == before
        # and the reloaded session can keep iterating
        r = reloaded.post(f"/api/sessions/{sid}/iterate", json={
            "accepted_item_ids": ["numeracy:g1"]})
        assert r.json()["status"] == "satisfied"

    def test_hundred_concurrent_creates(self, service):
        client = TestClient(create_app(service))

        def make(i):
            r = client.post("/api/sessions", json={"prompt": "a dog",
                                                   "preset": "zero"})
            return r.json()["session_id"]

        with concurrent.futures.ThreadPoolExecutor(max_workers=16) as pool:
            ids = list(pool.map(make, range(100)))
        assert len(set(ids)) == 100
        files = list((service.store_dir).glob("*.json"))
        assert len(files) == 100
        for path in files:
            json.loads(path.read_text())  # every store file is valid JSON
