"""Selection-service protocol, driven by a scripted in-process client."""

import json
import threading
import time
import urllib.error
import urllib.request
from itertools import combinations

import numpy as np
import pytest

from ttpo.cli import stage_generate
from ttpo.config import RunConfig
from ttpo.server import counts_from_choices, make_server, merge_sessions, pick_extremes
from ttpo.testbed import write_demo_dir


class Client:
    def __init__(self, port):
        self.base = f"http://127.0.0.1:{port}"

    def get(self, path):
        with urllib.request.urlopen(self.base + path) as r:
            return r.status, json.loads(r.read())

    def post(self, path, body):
        req = urllib.request.Request(
            self.base + path, data=json.dumps(body).encode(),
            headers={"Content-Type": "application/json"}, method="POST",
        )
        try:
            with urllib.request.urlopen(req) as r:
                return r.status, json.loads(r.read())
        except urllib.error.HTTPError as e:
            return e.code, json.loads(e.read())


@pytest.fixture(scope="module")
def session_env(tmp_path_factory):
    """A run directory with 6 candidates (human mode) plus a live server."""
    demo = write_demo_dir(tmp_path_factory.mktemp("serve_demo"))
    raw = json.loads((demo / "config.json").read_text())
    # one model x five scales -> original + 5 edits = 6 candidates
    raw["models"] = [m for m in raw["models"] if m["type"] == "gmm"]
    raw["steps"] = 15
    raw["guidance"]["steps"] = 15
    raw["selection_mode"] = "human"
    raw["output_dir"] = "run_human"
    cfg_path = demo / "config_human.json"
    cfg_path.write_text(json.dumps(raw))
    run_dir = stage_generate(RunConfig.load(cfg_path))
    server = make_server(run_dir, 8941)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield run_dir, Client(8941)
    server.shutdown()
    server.server_close()


def test_pairs_endpoint_counts(session_env):
    run_dir, client = session_env
    _, cands = client.get("/api/candidates")
    n = len(cands["candidates"])
    assert n == 6  # original + 1 model x 5 scales
    _, pairs = client.get("/api/pairs")
    assert len(pairs["pairs"]) == 15  # C(6, 2)
    # session-stable order across calls
    _, pairs2 = client.get("/api/pairs")
    assert [(p["a"], p["b"]) for p in pairs["pairs"]] == \
        [(p["a"], p["b"]) for p in pairs2["pairs"]]


def test_candidate_pixels_are_unit_scaled(session_env):
    _, client = session_env
    _, payload = client.get("/api/candidates")
    for c in payload["candidates"]:
        pix = np.array(c["pixels"])
        assert pix.size == c["height"] * c["width"]
        assert pix.min() >= 0.0 and pix.max() <= 1.0


def test_full_protocol_to_human_output(session_env):
    run_dir, client = session_env
    status, body = client.post("/api/finalize", {})
    assert status == 409 and body["error"] == "selection-pending"

    _, result = client.get("/api/result")
    assert result["pending"] is True

    _, pairs = client.get("/api/pairs")
    # deterministic scripted policy: always prefer the higher id
    for p in pairs["pairs"]:
        status, resp = client.post(
            "/api/choice", {"pair_index": p["index"], "winner_id": max(p["a"], p["b"])})
        assert status == 200 and resp["status"] == "recorded"

    # double-post is ignored and counts stay put
    p0 = pairs["pairs"][0]
    status, resp = client.post(
        "/api/choice", {"pair_index": p0["index"], "winner_id": min(p0["a"], p0["b"])})
    assert resp["status"] == "ignored"
    assert resp["answered"] == 15

    _, result = client.get("/api/result")
    # highest id wins every comparison it's in, lowest id loses all
    assert result["win_id"] == 5
    assert result["lose_id"] == 0
    assert result["counts"]["5"] == 5 and result["counts"]["0"] == 0

    status, fin = client.post("/api/finalize", {})
    assert status == 200 and fin["status"] in ("optimizing", "done")

    deadline = time.time() + 60
    out = {"ready": False}
    while time.time() < deadline and not out.get("ready"):
        _, out = client.get("/api/output")
        time.sleep(0.1)
    assert out["ready"], f"optimize did not finish: {out}"
    assert len(out["curves"]) == 15
    assert len(out["pixels"]) == out["height"] * out["width"]

    pair = json.loads(run_dir.pair_path.read_text())
    assert pair["provenance"] == "human"
    assert pair["win"] == 5 and pair["lose"] == 0


def test_serve_never_mutates_candidates(session_env):
    run_dir, _ = session_env
    before = run_dir.candidates_checksum()
    assert run_dir.candidates_checksum() == before


def test_bad_choice_rejected(session_env):
    _, client = session_env
    status, _ = client.post("/api/choice", {"pair_index": 0, "winner_id": 999})
    assert status == 400
    status, _ = client.post("/api/choice", {"pair_index": 10_000, "winner_id": 0})
    assert status == 400


def test_quick_pick_disabled_by_default(session_env):
    _, client = session_env
    status, _ = client.post("/api/quick-pick", {"win_id": 1, "lose_id": 0})
    assert status == 400


def test_quick_pick_mode(tmp_path):
    demo = write_demo_dir(tmp_path / "demo")
    raw = json.loads((demo / "config.json").read_text())
    raw["models"] = [m for m in raw["models"] if m["type"] == "gmm"]
    raw["scales"] = [0.15, 0.25]
    raw["steps"] = 10
    raw["guidance"]["steps"] = 10
    raw["selection_mode"] = "human"
    raw["output_dir"] = "run_quick"
    cfg_path = demo / "config_quick.json"
    cfg_path.write_text(json.dumps(raw))
    run_dir = stage_generate(RunConfig.load(cfg_path))
    server = make_server(run_dir, 8942, quick=True)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    client = Client(8942)
    try:
        status, resp = client.post("/api/quick-pick", {"win_id": 2, "lose_id": 0})
        assert status == 200 and resp["status"] in ("optimizing", "done")
        deadline = time.time() + 60
        out = {"ready": False}
        while time.time() < deadline and not out.get("ready"):
            _, out = client.get("/api/output")
            time.sleep(0.1)
        assert out["ready"]
        pair = json.loads(run_dir.pair_path.read_text())
        assert pair == {"win": 2, "lose": 0, "provenance": "human",
                        "r_win": 1.0, "r_lose": 0.0, "degenerate": False}
        # invalid picks rejected
        status, _ = client.post("/api/quick-pick", {"win_id": 2, "lose_id": 2})
        assert status == 400
    finally:
        server.shutdown()
        server.server_close()


# -- counting rules -----------------------------------------------------------

def test_counts_and_extremes_rules():
    pair_ids = list(combinations(range(4), 2))
    choices = {i: max(a, b) for i, (a, b) in enumerate(pair_ids)}
    counts = counts_from_choices(pair_ids, choices)
    assert counts == {0: 0, 1: 1, 2: 2, 3: 3}
    assert pick_extremes(counts) == (3, 0)
    # ties break toward the lowest id
    assert pick_extremes({0: 2, 1: 2, 2: 0, 3: 0}) == (0, 2)


def test_merge_sessions_sums_counts():
    pair_ids = [[0, 1], [0, 2], [1, 2]]
    s1 = {"pairs": pair_ids, "choices": {"0": 1, "1": 2, "2": 2}}
    s2 = {"pairs": pair_ids, "choices": {"0": 0, "1": 2, "2": 1}}
    totals = merge_sessions([s1, s2])
    assert totals == {0: 1, 1: 2, 2: 3}
    assert pick_extremes(totals) == (2, 0)
