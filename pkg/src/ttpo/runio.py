"""Run-directory layout and stage artifacts.

A run directory accumulates, stage by stage: ``config.json`` (snapshot),
``candidates/`` (field binaries plus ``manifest.json``), ``scores.json``,
``pair.json``, ``curves.csv``, ``output.bin``/``output.json``/``output.pgm``,
and ``log.txt``.  Artifacts are append-only within a run; a completed stage
re-run with identical inputs is a checksummed no-op unless forced.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

from .candidates import CandidateSet, Candidate
from .errors import InvalidConfigError, SelectionPendingError
from .fieldio import read_field_binary, write_field_binary, write_pgm
from .selection import PreferencePair, ScoreMatrix

log = logging.getLogger("ttpo")


class RunDirectory:
    def __init__(self, root):
        self.root = Path(root)

    # -- layout -----------------------------------------------------------

    @property
    def config_path(self) -> Path:
        return self.root / "config.json"

    @property
    def candidates_dir(self) -> Path:
        return self.root / "candidates"

    @property
    def manifest_path(self) -> Path:
        return self.candidates_dir / "manifest.json"

    @property
    def scores_path(self) -> Path:
        return self.root / "scores.json"

    @property
    def pair_path(self) -> Path:
        return self.root / "pair.json"

    @property
    def curves_path(self) -> Path:
        return self.root / "curves.csv"

    @property
    def output_path(self) -> Path:
        return self.root / "output.bin"

    @property
    def log_path(self) -> Path:
        return self.root / "log.txt"

    def ensure(self) -> "RunDirectory":
        self.root.mkdir(parents=True, exist_ok=True)
        return self

    def attach_log(self) -> logging.Handler:
        self.ensure()
        handler = logging.FileHandler(self.log_path)
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        log.addHandler(handler)
        log.setLevel(logging.INFO)
        return handler

    # -- stage 1 ----------------------------------------------------------

    def write_candidates(self, cset: CandidateSet) -> None:
        self.candidates_dir.mkdir(parents=True, exist_ok=True)
        manifest = []
        for c in cset.candidates:
            name = f"{c.id:03d}.bin"
            write_field_binary(c.field, self.candidates_dir / name)
            manifest.append({
                "id": c.id, "file": name, "source": c.source,
                "noise_scale": c.noise_scale, "seed": c.seed,
            })
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    def read_candidates(self) -> CandidateSet:
        if not self.manifest_path.exists():
            raise InvalidConfigError(f"no candidates under {self.candidates_dir}; run generate first")
        manifest = json.loads(self.manifest_path.read_text())
        cands = [
            Candidate(
                id=int(m["id"]),
                field=read_field_binary(self.candidates_dir / m["file"]),
                source=m["source"],
                noise_scale=m.get("noise_scale"),
                seed=m.get("seed"),
            )
            for m in manifest
        ]
        return CandidateSet(restored=cands[0].field.copy(), candidates=cands)

    def candidates_checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self.manifest_path.read_bytes())
        for m in json.loads(self.manifest_path.read_text()):
            h.update((self.candidates_dir / m["file"]).read_bytes())
        return h.hexdigest()

    # -- stage 2 ----------------------------------------------------------

    def write_scores(self, cset: CandidateSet, matrix: ScoreMatrix,
                     rewards: list[float], pair: PreferencePair) -> None:
        payload = {
            "candidates": [c.id for c in cset.candidates],
            "scorers": matrix.scorer_names,
            "raw": matrix.raw.tolist(),
            "normalized": matrix.normalized.tolist(),
            "rewards": list(rewards),
            "pair": pair.to_json(),
        }
        self.scores_path.write_text(json.dumps(payload, indent=2) + "\n")

    def write_pair(self, pair: PreferencePair) -> None:
        self.pair_path.write_text(json.dumps(pair.to_json(), indent=2) + "\n")

    def read_pair(self) -> PreferencePair:
        if not self.pair_path.exists():
            raise SelectionPendingError(
                f"no pair.json under {self.root}; run select (or finish a UI session) first"
            )
        d = json.loads(self.pair_path.read_text())
        return PreferencePair(
            win_id=int(d["win"]), lose_id=int(d["lose"]), provenance=d["provenance"],
            r_win=float(d["r_win"]), r_lose=float(d["r_lose"]),
            degenerate=bool(d.get("degenerate", False)),
        )

    # -- stage 3 ----------------------------------------------------------

    def write_output(self, field, record) -> None:
        write_field_binary(field, self.output_path)
        write_pgm(field, self.root / "output.pgm")
        record.write_curves_csv(self.curves_path)
        if record.config is not None:
            (self.root / "optimize_config.json").write_text(
                json.dumps(record.config.to_json(), indent=2, sort_keys=True) + "\n"
            )

    def output_checksum(self) -> str:
        return hashlib.sha256(self.output_path.read_bytes()).hexdigest()
