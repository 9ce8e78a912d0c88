"""Preference selection: pluggable quality scorers, Z-score normalization,
the hybrid averaged reward, win/lose picking, and the metric-combination
match experiment.

Scorers are deterministic ``field -> float`` callables with a
``higher_is_better`` orientation; lower-is-better raw rows are negated
*before* normalization so every normalized row reads higher-is-better.
Z-scores use the population standard deviation (the candidate set is the
whole population of interest), and constant rows normalize to zeros so a
flat scorer is neutral rather than fatal.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import InvalidInputError, TooFewCandidatesError
from .fields import Field, fft2, gaussian_lowpass_mask
from .velocity import GaussianMixtureField

log = logging.getLogger("ttpo")


@dataclass
class Scorer:
    name: str
    fn: Callable[[Field], float]
    higher_is_better: bool = True

    def score(self, f: Field) -> float:
        v = float(self.fn(f))
        if not np.isfinite(v):
            raise InvalidInputError(f"scorer {self.name} produced non-finite value {v}")
        return v


def hf_energy_scorer(d0: float = 0.9) -> Scorer:
    """Mean squared modulus of the high-frequency spectrum: rewards texture."""

    def fn(f: Field) -> float:
        mask = gaussian_lowpass_mask(f.height, f.width, d0)
        total, _ = _kernels.masked_sq(fft2(f).coefficients, mask.highpass)
        return total / f.data.size

    return Scorer("hf_energy", fn)


def neg_total_variation_scorer() -> Scorer:
    """Negated mean absolute forward difference over both axes: rewards
    smoothness (already orientation-corrected, hence higher-is-better)."""

    def fn(f: Field) -> float:
        h, w = f.shape
        terms = h * (w - 1) + (h - 1) * w
        if terms == 0:
            return 0.0
        return -_kernels.tv_sum(f.data) / terms

    return Scorer("neg_total_variation", fn)


def mixture_loglik_scorer(prior: GaussianMixtureField) -> Scorer:
    """Log density under a Gaussian-mixture prior: rewards plausibility."""
    return Scorer("mixture_loglik", prior.log_density)


def energy_scorer() -> Scorer:
    """Mean squared amplitude; a crude contrast proxy."""
    return Scorer("energy", lambda f: float(np.mean(f.data**2)))


def laplacian_energy_scorer() -> Scorer:
    """Mean squared 5-point Laplacian (wrap padding); a sharpness proxy."""

    def fn(f: Field) -> float:
        a = f.data
        lap = (
            np.roll(a, 1, 0) + np.roll(a, -1, 0) + np.roll(a, 1, 1) + np.roll(a, -1, 1)
            - 4.0 * a
        )
        return float(np.mean(lap**2))

    return Scorer("laplacian_energy", fn)


def total_variation_scorer() -> Scorer:
    """Raw mean absolute forward difference, lower-is-better; exists mainly
    to exercise the orientation flip in normalization."""

    def fn(f: Field) -> float:
        h, w = f.shape
        terms = h * (w - 1) + (h - 1) * w
        return _kernels.tv_sum(f.data) / terms if terms else 0.0

    return Scorer("total_variation", fn, higher_is_better=False)


def resolve_scorer(name: str, prior: Optional[GaussianMixtureField] = None) -> Scorer:
    """Look up a scorer by config name.

    ``hf_energy`` takes an optional cutoff suffix (``hf_energy:0.5``);
    ``mixture_loglik`` requires a Gaussian-mixture prior in scope.
    """
    if name.startswith("hf_energy"):
        d0 = float(name.split(":", 1)[1]) if ":" in name else 0.9
        s = hf_energy_scorer(d0)
        s.name = name
        return s
    if name == "neg_total_variation":
        return neg_total_variation_scorer()
    if name == "total_variation":
        return total_variation_scorer()
    if name == "energy":
        return energy_scorer()
    if name == "laplacian_energy":
        return laplacian_energy_scorer()
    if name == "mixture_loglik":
        if prior is None:
            raise InvalidInputError(
                "mixture_loglik needs a Gaussian-mixture model as the scoring prior"
            )
        return mixture_loglik_scorer(prior)
    raise InvalidInputError(f"unknown scorer {name!r}")


def zscore_normalize(row: Sequence[float]) -> list[float]:
    """Population Z-score of one raw row; constant rows map to all zeros."""
    r = np.asarray(row, dtype=np.float64)
    if r.size < 2:
        raise TooFewCandidatesError(f"need at least 2 values to normalize, got {r.size}")
    mu = r.mean()
    sigma = r.std()  # population std
    if sigma == 0.0:
        return [0.0] * r.size
    return list((r - mu) / sigma)


@dataclass
class ScoreMatrix:
    """Raw and Z-scored values, one row per scorer, one column per candidate."""

    scorer_names: list[str]
    raw: np.ndarray
    normalized: np.ndarray

    @classmethod
    def build(cls, scorers: Sequence[Scorer], fields: Sequence[Field]) -> "ScoreMatrix":
        if not scorers:
            raise InvalidInputError("need at least one scorer")
        if len(fields) < 2:
            raise TooFewCandidatesError(f"need at least 2 candidates, got {len(fields)}")
        raw = np.array([[s.score(f) for f in fields] for s in scorers])
        oriented = np.array([
            row if s.higher_is_better else -row for s, row in zip(scorers, raw)
        ])
        normalized = np.array([zscore_normalize(row) for row in oriented])
        return cls([s.name for s in scorers], raw, normalized)


def hybrid_reward(m: ScoreMatrix) -> list[float]:
    """Per-candidate mean of the normalized rows (K-scorer average)."""
    if m.normalized.size == 0:
        raise InvalidInputError("empty score matrix")
    return list(m.normalized.mean(axis=0))


@dataclass
class PreferencePair:
    win_id: int
    lose_id: int
    provenance: str  # "hybrid-metric" | "human"
    r_win: float
    r_lose: float
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "win": self.win_id,
            "lose": self.lose_id,
            "provenance": self.provenance,
            "r_win": self.r_win,
            "r_lose": self.r_lose,
            "degenerate": self.degenerate,
        }


def select_pair(rewards: Sequence[float], ids: Sequence[int]) -> PreferencePair:
    """Argmax/argmin over rewards, ties broken toward the lowest id.

    All-equal rewards degenerate to (lowest id, second-lowest id) with a
    logged warning.
    """
    if len(rewards) != len(ids):
        raise InvalidInputError("rewards and ids must align")
    if len(rewards) < 2:
        raise TooFewCandidatesError(f"need at least 2 candidates, got {len(rewards)}")
    r = np.asarray(rewards, dtype=np.float64)
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    if np.all(r == r[0]):
        log.warning("degenerate selection: all rewards equal; picking two lowest ids")
        win_pos, lose_pos = order[0], order[1]
        return PreferencePair(
            ids[win_pos], ids[lose_pos], "hybrid-metric",
            float(r[win_pos]), float(r[lose_pos]), degenerate=True,
        )
    win_pos = min((i for i in range(len(r)) if r[i] == r.max()), key=lambda i: ids[i])
    lose_pos = min((i for i in range(len(r)) if r[i] == r.min()), key=lambda i: ids[i])
    return PreferencePair(
        ids[win_pos], ids[lose_pos], "hybrid-metric", float(r[win_pos]), float(r[lose_pos])
    )


def select_from_fields(
    scorers: Sequence[Scorer], fields: Sequence[Field], ids: Sequence[int]
) -> tuple[ScoreMatrix, list[float], PreferencePair]:
    """Score, normalize, average, pick — the whole metric-mode stage 2."""
    m = ScoreMatrix.build(scorers, fields)
    rewards = hybrid_reward(m)
    return m, rewards, select_pair(rewards, ids)


@dataclass
class MatchExperimentResult:
    scorer_names: list[str]
    matches: dict[str, int]
    denominator: int
    n_groups: int
    n_triples: int

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scorer", "matches", "denominator"])
            for name in self.scorer_names:
                w.writerow([name, self.matches[name], self.denominator])


def metric_match_experiment(
    groups: Sequence[tuple[Sequence[Field], Sequence[int], int, int]],
    scorers: Sequence[Scorer],
) -> MatchExperimentResult:
    """Count, per scorer, how often the triples containing it reproduce the
    human ground truth.

    Each group is ``(fields, ids, gt_win, gt_lose)``.  All C(K, 3) scorer
    triples run hybrid selection on every group; when *both* the win and
    the lose match the labels, every scorer in the triple gets a point.
    The per-scorer denominator is ``len(groups) * C(K-1, 2)``.
    """
    k = len(scorers)
    if k < 3:
        raise InvalidInputError(f"need at least 3 scorers, got {k}")
    for fields, ids, gt_win, gt_lose in groups:
        if gt_win is None or gt_lose is None:
            raise InvalidInputError("every group needs ground-truth win/lose labels")
        if gt_win not in ids or gt_lose not in ids:
            raise InvalidInputError("ground-truth labels must name candidate ids")
    matches = {s.name: 0 for s in scorers}
    # score each (scorer, group) once; triples reuse the cached rows
    cache: list[list[np.ndarray]] = []
    for fields, ids, _, _ in groups:
        rows = []
        for s in scorers:
            raw = np.array([s.score(f) for f in fields])
            rows.append(raw if s.higher_is_better else -raw)
        cache.append(rows)
    n_triples = 0
    for triple in combinations(range(k), 3):
        n_triples += 1
        for gi, (fields, ids, gt_win, gt_lose) in enumerate(groups):
            normalized = np.array([zscore_normalize(cache[gi][si]) for si in triple])
            rewards = list(normalized.mean(axis=0))
            pair = select_pair(rewards, ids)
            if pair.win_id == gt_win and pair.lose_id == gt_lose:
                for si in triple:
                    matches[scorers[si].name] += 1
    denominator = len(groups) * comb(k - 1, 2)
    return MatchExperimentResult(
        [s.name for s in scorers], matches, denominator, len(groups), n_triples
    )
