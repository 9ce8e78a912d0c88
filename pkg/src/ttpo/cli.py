"""Command-line entry point.

Subcommands mirror the pipeline stages plus the two experiment harnesses
and the selection-UI server:

    ttpo generate --config cfg.json [--force] [--seed N]
    ttpo select   --run-dir DIR --mode metric|human
    ttpo optimize --run-dir DIR [--force]
    ttpo run      --config cfg.json [--force] [--seed N]
    ttpo gsweep   --config cfg.json [--grid g1,g2,...]
    ttpo match-experiment --config fixture.json [--run-dir DIR]
    ttpo serve    --run-dir DIR --port N

Every failure exits nonzero with one ``{"code", "message"}`` JSON line on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .candidates import build_candidate_set
from .config import RunConfig
from .errors import (
    GuidanceDivergedError,
    InvalidConfigError,
    SelectionPendingError,
    TtpoError,
)
from .fieldio import read_field_binary
from .guidance import optimize as run_optimize
from .runio import RunDirectory
from .selection import (
    ScoreMatrix,
    hybrid_reward,
    metric_match_experiment,
    resolve_scorer,
    select_from_fields,
)
from .velocity import GaussianMixtureField

log = logging.getLogger("ttpo")

SWEEP_UNITS = (0.1, 0.3, 1.0, 3.0, 10.0)  # in 1/dt units; scaled by step count


def _snapshot(cfg: RunConfig) -> dict:
    return {**cfg.raw, "_base_dir": str(cfg.base_dir.resolve())}


def _load_run_config(run_dir: RunDirectory) -> RunConfig:
    if not run_dir.config_path.exists():
        raise InvalidConfigError(f"no config.json under {run_dir.root}; run generate first")
    raw = json.loads(run_dir.config_path.read_text())
    base = raw.pop("_base_dir", str(run_dir.root))
    return RunConfig.from_dict(raw, base_dir=base)


def _scoring_prior(cfg: RunConfig):
    model = cfg.optimizer()
    return model if isinstance(model, GaussianMixtureField) else None


def _resolve_scorers(cfg: RunConfig):
    prior = _scoring_prior(cfg)
    return [resolve_scorer(name, prior) for name in cfg.scorers]


def stage_generate(cfg: RunConfig, force: bool = False) -> RunDirectory:
    run_dir = RunDirectory(cfg.run_dir()).ensure()
    handler = run_dir.attach_log()
    try:
        snapshot = _snapshot(cfg)
        if run_dir.manifest_path.exists() and not force:
            old = json.loads(run_dir.config_path.read_text()) if run_dir.config_path.exists() else None
            if old == snapshot:
                log.info("generate: candidates already present with identical config; no-op")
                return run_dir
            raise InvalidConfigError(
                f"{run_dir.root} already holds candidates from a different config; use --force"
            )
        run_dir.config_path.write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")
        y0 = cfg.load_input()
        models = cfg.build_models()
        log.info("generate: %d models x %d scales on %dx%d field",
                 len(models), len(cfg.scales), *y0.shape)
        cset = build_candidate_set(y0, models, cfg.scales, cfg.steps, cfg.seed)
        run_dir.write_candidates(cset)
        log.info("generate: wrote %d candidates", len(cset))
        return run_dir
    finally:
        log.removeHandler(handler)


def stage_select(run_dir: RunDirectory, mode: str) -> None:
    handler = run_dir.attach_log()
    try:
        if mode == "human":
            if run_dir.pair_path.exists():
                pair = run_dir.read_pair()
                if pair.provenance == "human":
                    log.info("select: human pair already recorded (win=%d lose=%d)",
                             pair.win_id, pair.lose_id)
                    return
            raise SelectionPendingError(
                "human selection requires a completed UI session; run `ttpo serve` and finalize"
            )
        cfg = _load_run_config(run_dir)
        cset = run_dir.read_candidates()
        scorers = _resolve_scorers(cfg)
        matrix, rewards, pair = select_from_fields(
            scorers, [c.field for c in cset.candidates], [c.id for c in cset.candidates]
        )
        run_dir.write_scores(cset, matrix, rewards, pair)
        run_dir.write_pair(pair)
        log.info("select: win=%d (r=%.4f) lose=%d (r=%.4f)",
                 pair.win_id, pair.r_win, pair.lose_id, pair.r_lose)
    finally:
        log.removeHandler(handler)


def stage_optimize(run_dir: RunDirectory, force: bool = False) -> None:
    handler = run_dir.attach_log()
    try:
        if run_dir.output_path.exists() and not force:
            log.info("optimize: output already present; no-op (use --force to rerun)")
            return
        cfg = _load_run_config(run_dir)
        pair = run_dir.read_pair()
        cset = run_dir.read_candidates()
        y0 = cset.restored
        yw = cset.by_id(pair.win_id).field
        yl = cset.by_id(pair.lose_id).field
        model = cfg.optimizer()
        try:
            out, record = run_optimize(y0, yw, yl, model, cfg.guidance)
        except GuidanceDivergedError as err:
            partial = getattr(err, "record", None)
            if partial is not None:
                partial.write_curves_csv(run_dir.curves_path)
                log.error("optimize: diverged after %d steps; partial curves persisted",
                          len(partial.rows))
            raise
        run_dir.write_output(out, record)
        log.info("optimize: wrote output and %d curve rows", len(record.rows))
    finally:
        log.removeHandler(handler)


def stage_run(cfg: RunConfig, force: bool = False) -> RunDirectory:
    run_dir = stage_generate(cfg, force=force)
    if cfg.selection_mode == "human":
        raise SelectionPendingError(
            "selection_mode is human: candidates are ready; run `ttpo serve` to collect choices"
        )
    stage_select(run_dir, cfg.selection_mode)
    stage_optimize(run_dir, force=force)
    return run_dir


def stage_gsweep(cfg: RunConfig, grid=None, force: bool = False) -> Path:
    """The correction-scale sweep: one optimize run per g on a shared
    candidate/pair context, hybrid-scored across all sweep outputs."""
    run_dir = stage_generate(cfg, force=force)
    if cfg.selection_mode == "metric":
        if not run_dir.pair_path.exists() or force:
            stage_select(run_dir, "metric")
    pair = run_dir.read_pair()
    cset = run_dir.read_candidates()
    y0, yw, yl = cset.restored, cset.by_id(pair.win_id).field, cset.by_id(pair.lose_id).field
    model = cfg.optimizer()
    if grid is None:
        grid = [u * cfg.guidance.steps for u in SWEEP_UNITS]
    outputs = []
    for g in grid:
        sub = RunDirectory(run_dir.root / "gsweep" / f"g_{g:g}").ensure()
        gcfg = type(cfg.guidance).from_json({**cfg.guidance.to_json(), "g": float(g)})
        out, record = run_optimize(y0, yw, yl, model, gcfg)
        sub.write_output(out, record)
        outputs.append(out)
    scorers = _resolve_scorers(cfg)
    matrix = ScoreMatrix.build(scorers, outputs)
    rewards = hybrid_reward(matrix)
    best = int(np.argmax(rewards))
    summary = run_dir.root / "gsweep" / "gsweep.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["g", "hybrid_reward"])
        for g, r in zip(grid, rewards):
            w.writerow([repr(float(g)), repr(float(r))])
    (run_dir.root / "gsweep" / "gsweep_best.json").write_text(
        json.dumps({"g": float(grid[best]), "hybrid_reward": float(rewards[best])}, indent=2) + "\n"
    )
    return summary


def run_match_experiment(fixture_path, out_dir=None) -> Path:
    fixture_path = Path(fixture_path)
    fixture = json.loads(fixture_path.read_text())
    base = fixture_path.parent
    prior = None
    if "prior" in fixture:
        comps = [
            (float(c["weight"]), read_field_binary(base / c["mean"]), float(c["sigma"]))
            for c in fixture["prior"]["components"]
        ]
        prior = GaussianMixtureField(comps)
    scorers = [resolve_scorer(name, prior) for name in fixture["scorers"]]
    groups = []
    for g in fixture["groups"]:
        fields = [read_field_binary(base / p) for p in g["candidates"]]
        ids = g.get("ids", list(range(len(fields))))
        groups.append((fields, ids, int(g["win"]), int(g["lose"])))
    result = metric_match_experiment(groups, scorers)
    out_dir = Path(out_dir) if out_dir else base
    out_dir.mkdir(parents=True, exist_ok=True)
    out_csv = out_dir / "match_experiment.csv"
    result.write_csv(out_csv)
    for name in result.scorer_names:
        print(f"{name}: {result.matches[name]}/{result.denominator}")
    return out_csv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ttpo", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        sp = sub.add_parser(name, **kw)
        sp.add_argument("--config", type=Path, help="path to a run config JSON")
        sp.add_argument("--run-dir", type=Path, help="path to an existing run directory")
        sp.add_argument("--mode", choices=["metric", "human"], help="selection mode")
        sp.add_argument("--port", type=int, default=8765, help="HTTP port for serve")
        sp.add_argument("--force", action="store_true", help="redo completed stages")
        sp.add_argument("--seed", type=int, help="override the config seed")
        return sp

    add("generate", help="stage 1: build the candidate pool")
    add("select", help="stage 2: pick the win/lose pair")
    add("optimize", help="stage 3: guided denoising of the restored field")
    add("run", help="all three stages")
    gs = add("gsweep", help="sweep the correction scale g and rank outputs")
    gs.add_argument("--grid", type=str, help="comma-separated g values")
    add("match-experiment", help="scorer-triple agreement counts against labels")
    sv = add("serve", help="HTTP service for the human-selection UI")
    sv.add_argument("--quick", action="store_true",
                    help="also allow direct best/worst picking (default is the "
                         "exhaustive pairwise protocol)")
    return p


def _require(args, attr, flag):
    v = getattr(args, attr)
    if v is None:
        raise InvalidConfigError(f"{args.command} requires {flag}")
    return v


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("generate", "run", "gsweep"):
            cfg = RunConfig.load(_require(args, "config", "--config"))
            if args.seed is not None:
                cfg.seed = args.seed
                cfg.raw = {**cfg.raw, "seed": args.seed}
            if args.command == "generate":
                run_dir = stage_generate(cfg, force=args.force)
                print(run_dir.root)
            elif args.command == "run":
                run_dir = stage_run(cfg, force=args.force)
                print(run_dir.root)
            else:
                grid = [float(x) for x in args.grid.split(",")] if args.grid else None
                print(stage_gsweep(cfg, grid=grid, force=args.force))
        elif args.command == "select":
            run_dir = RunDirectory(_require(args, "run_dir", "--run-dir"))
            stage_select(run_dir, args.mode or "metric")
            print(run_dir.pair_path)
        elif args.command == "optimize":
            run_dir = RunDirectory(_require(args, "run_dir", "--run-dir"))
            stage_optimize(run_dir, force=args.force)
            print(run_dir.output_path)
        elif args.command == "match-experiment":
            print(run_match_experiment(_require(args, "config", "--config"), args.run_dir))
        elif args.command == "serve":
            from .server import serve  # deferred: stdlib-only but heavier import

            run_dir = RunDirectory(_require(args, "run_dir", "--run-dir"))
            serve(run_dir, args.port, quick=getattr(args, "quick", False))
        return 0
    except TtpoError as err:
        print(json.dumps(err.to_json()), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
