"""HTTP service exposing the pairwise human-selection protocol.

Endpoints (JSON in/out):

* ``GET  /api/candidates`` — candidate pixel grids, min-max scaled to [0, 1]
* ``GET  /api/pairs``      — all C(n,2) unordered pairs in session-stable order
* ``POST /api/choice``     — record one pairwise winner; idempotent per pair
* ``GET  /api/result``     — counts-based win/lose once every pair is answered
* ``POST /api/finalize``   — persist the human pair and launch optimization
* ``GET  /api/output``     — optimized pixels plus curve rows when ready

Choices are serialized under one lock and persisted to ``session.json`` in
the run directory after every write, so an interrupted session resumes.
The candidate pool itself is never mutated.  A sibling ``frontend/dist``
(or ``TTPO_UI_DIR``) is served statically for the browser client.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from itertools import combinations
from pathlib import Path

from .errors import SelectionPendingError, TtpoError
from .fieldio import scale_unit
from .runio import RunDirectory
from .selection import PreferencePair

log = logging.getLogger("ttpo")


def counts_from_choices(pair_ids: list[tuple[int, int]], choices: dict[int, int]) -> dict[int, int]:
    """Selection counts per candidate over the answered pairs."""
    counts = {cid: 0 for pair in pair_ids for cid in pair}
    for winner in choices.values():
        counts[winner] += 1
    return counts


def merge_sessions(session_payloads: list[dict]) -> dict[int, int]:
    """Multi-annotator aggregation: sum the per-candidate selection counts
    across completed session files; win/lose follow the same most/least rule."""
    totals: dict[int, int] = {}
    for payload in session_payloads:
        pair_ids = [tuple(p) for p in payload["pairs"]]
        choices = {int(k): int(v) for k, v in payload["choices"].items()}
        for cid, c in counts_from_choices(pair_ids, choices).items():
            totals[cid] = totals.get(cid, 0) + c
    return totals


def pick_extremes(counts: dict[int, int]) -> tuple[int, int]:
    """Most / least frequently chosen ids, ties toward the lowest id."""
    win = min((cid for cid in counts), key=lambda c: (-counts[c], c))
    lose = min((cid for cid in counts), key=lambda c: (counts[c], c))
    return win, lose


class SelectionSession:
    """Server-side truth for one annotator session.

    The default protocol is pairwise-exhaustive (all C(n,2) comparisons,
    counts-based win/lose).  ``quick=True`` additionally allows a direct
    best/worst pick, skipping the comparisons.
    """

    def __init__(self, run_dir: RunDirectory, quick: bool = False):
        self.run_dir = run_dir
        self.quick = quick
        self.cset = run_dir.read_candidates()
        ids = [c.id for c in self.cset.candidates]
        self.pair_ids: list[tuple[int, int]] = list(combinations(sorted(ids), 2))
        self.choices: dict[int, int] = {}
        self.lock = threading.Lock()
        self.optimize_thread: threading.Thread | None = None
        self.optimize_error: str | None = None
        self._load_session()

    # -- persistence -------------------------------------------------------

    @property
    def session_path(self) -> Path:
        return self.run_dir.root / "session.json"

    def _load_session(self) -> None:
        if self.session_path.exists():
            payload = json.loads(self.session_path.read_text())
            stored = [tuple(p) for p in payload.get("pairs", [])]
            if stored == self.pair_ids:
                self.choices = {int(k): int(v) for k, v in payload.get("choices", {}).items()}
                log.info("resumed session with %d/%d choices", len(self.choices), len(self.pair_ids))

    def _save_session(self) -> None:
        payload = {"pairs": [list(p) for p in self.pair_ids],
                   "choices": {str(k): v for k, v in self.choices.items()}}
        self.session_path.write_text(json.dumps(payload, indent=2) + "\n")

    # -- protocol ----------------------------------------------------------

    def candidates_payload(self) -> dict:
        out = []
        for c in self.cset.candidates:
            out.append({
                "id": c.id,
                "height": c.field.height,
                "width": c.field.width,
                "source": c.source,
                "pixels": scale_unit(c.field).ravel().tolist(),
            })
        return {"candidates": out}

    def pairs_payload(self) -> dict:
        with self.lock:
            pairs = [
                {
                    "index": i, "a": a, "b": b,
                    "answered": i in self.choices,
                    "winner": self.choices.get(i),
                }
                for i, (a, b) in enumerate(self.pair_ids)
            ]
        return {"pairs": pairs, "total": len(pairs)}

    def record_choice(self, pair_index: int, winner_id: int) -> dict:
        if not 0 <= pair_index < len(self.pair_ids):
            raise TtpoError(f"pair_index {pair_index} out of range")
        a, b = self.pair_ids[pair_index]
        if winner_id not in (a, b):
            raise TtpoError(f"winner {winner_id} not in pair ({a}, {b})")
        with self.lock:
            if pair_index in self.choices:
                status = "ignored"  # a pair is answered once
            else:
                self.choices[pair_index] = winner_id
                self._save_session()
                status = "recorded"
            answered = len(self.choices)
        return {"status": status, "answered": answered, "total": len(self.pair_ids)}

    def result_payload(self) -> dict:
        with self.lock:
            answered = len(self.choices)
            total = len(self.pair_ids)
            if answered < total:
                return {"pending": True, "answered": answered, "total": total}
            counts = counts_from_choices(self.pair_ids, self.choices)
        win, lose = pick_extremes(counts)
        return {"win_id": win, "lose_id": lose,
                "counts": {str(k): v for k, v in sorted(counts.items())}}

    def finalize(self) -> dict:
        result = self.result_payload()
        if result.get("pending"):
            raise SelectionPendingError(
                f"{result['answered']}/{result['total']} pairs answered"
            )
        with self.lock:
            if not self.run_dir.pair_path.exists():
                counts = counts_from_choices(self.pair_ids, self.choices)
                pair = PreferencePair(
                    win_id=result["win_id"], lose_id=result["lose_id"],
                    provenance="human",
                    r_win=float(counts[result["win_id"]]),
                    r_lose=float(counts[result["lose_id"]]),
                )
                self.run_dir.write_pair(pair)
            if self.optimize_thread is None:
                self.optimize_thread = threading.Thread(target=self._optimize_worker, daemon=True)
                self.optimize_thread.start()
        done = self.run_dir.output_path.exists() and not self.optimize_thread.is_alive()
        return {"status": "done" if done else "optimizing", "output_available": done}

    def quick_pick(self, win_id: int, lose_id: int) -> dict:
        """Direct best/worst selection (only with the quick flag)."""
        if not self.quick:
            raise TtpoError("quick picking is disabled; answer the pairwise queue")
        known = {c.id for c in self.cset.candidates}
        if win_id not in known or lose_id not in known:
            raise TtpoError(f"unknown candidate id in ({win_id}, {lose_id})")
        if win_id == lose_id:
            raise TtpoError("win and lose must differ")
        with self.lock:
            if not self.run_dir.pair_path.exists():
                self.run_dir.write_pair(PreferencePair(
                    win_id=win_id, lose_id=lose_id, provenance="human",
                    r_win=1.0, r_lose=0.0,
                ))
            if self.optimize_thread is None:
                self.optimize_thread = threading.Thread(target=self._optimize_worker, daemon=True)
                self.optimize_thread.start()
        done = self.run_dir.output_path.exists() and not self.optimize_thread.is_alive()
        return {"status": "done" if done else "optimizing", "output_available": done}

    def _optimize_worker(self) -> None:
        from .cli import stage_optimize  # late import to avoid a cycle

        try:
            stage_optimize(self.run_dir)
        except TtpoError as err:
            self.optimize_error = str(err)
            log.error("background optimize failed: %s", err)

    def output_payload(self) -> dict:
        if self.optimize_error:
            return {"ready": False, "error": self.optimize_error}
        thread = self.optimize_thread
        if not self.run_dir.output_path.exists() or (thread is not None and thread.is_alive()):
            return {"ready": False}
        from .fieldio import read_field_binary

        field = read_field_binary(self.run_dir.output_path)
        curves = []
        if self.run_dir.curves_path.exists():
            import csv as _csv

            with open(self.run_dir.curves_path) as fh:
                for row in _csv.DictReader(fh):
                    curves.append({k: float(v) for k, v in row.items()})
        return {
            "ready": True,
            "height": field.height,
            "width": field.width,
            "pixels": scale_unit(field).ravel().tolist(),
            "curves": curves,
        }


def find_ui_dir() -> Path | None:
    env = os.environ.get("TTPO_UI_DIR")
    candidates = [Path(env)] if env else []
    candidates += [Path.cwd() / "frontend", Path(__file__).resolve().parents[2] / "frontend"]
    for c in candidates:
        if (c / "index.html").exists():
            return c
    return None


def make_handler(session: SelectionSession, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # route through the package logger
            log.debug("http: " + fmt, *args)

        def _send_json(self, obj, status=200):
            body = json.dumps(obj).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            return json.loads(self.rfile.read(length) or b"{}")

        def do_GET(self):
            try:
                if self.path == "/api/candidates":
                    self._send_json(session.candidates_payload())
                elif self.path == "/api/pairs":
                    self._send_json(session.pairs_payload())
                elif self.path == "/api/result":
                    self._send_json(session.result_payload())
                elif self.path == "/api/output":
                    self._send_json(session.output_payload())
                else:
                    self._send_static()
            except TtpoError as err:
                self._send_json(err.to_json(), status=400)

        def do_POST(self):
            try:
                if self.path == "/api/choice":
                    body = self._read_json()
                    self._send_json(session.record_choice(
                        int(body["pair_index"]), int(body["winner_id"])))
                elif self.path == "/api/finalize":
                    try:
                        self._send_json(session.finalize())
                    except SelectionPendingError as err:
                        self._send_json({"error": "selection-pending", "message": str(err)},
                                        status=409)
                elif self.path == "/api/quick-pick":
                    body = self._read_json()
                    self._send_json(session.quick_pick(
                        int(body["win_id"]), int(body["lose_id"])))
                else:
                    self._send_json({"error": "not-found"}, status=404)
            except (KeyError, ValueError, json.JSONDecodeError) as err:
                self._send_json({"error": "bad-request", "message": str(err)}, status=400)
            except TtpoError as err:
                self._send_json(err.to_json(), status=400)

        def _send_static(self):
            if ui_dir is None:
                self._send_json({"error": "not-found"}, status=404)
                return
            rel = self.path.lstrip("/") or "index.html"
            target = (ui_dir / rel).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                self._send_json({"error": "not-found"}, status=404)
                return
            ctype = {
                ".html": "text/html", ".js": "text/javascript",
                ".css": "text/css", ".map": "application/json",
            }.get(target.suffix, "application/octet-stream")
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


def make_server(run_dir: RunDirectory, port: int, quick: bool = False) -> ThreadingHTTPServer:
    session = SelectionSession(run_dir, quick=quick)
    handler = make_handler(session, find_ui_dir())
    server = ThreadingHTTPServer(("127.0.0.1", port), handler)
    server.session = session  # handy for tests
    return server


def serve(run_dir: RunDirectory, port: int, quick: bool = False) -> None:
    server = make_server(run_dir, port, quick=quick)
    log.warning("serving selection UI for %s on http://127.0.0.1:%d", run_dir.root, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
