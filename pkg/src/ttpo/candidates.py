"""Candidate pool construction: noise the restored field to a bounded
scale and regenerate it with each velocity model.

Every (model, scale) pair draws its own noise from a counter-derived seed,
so appending a model or scale never perturbs earlier candidates.  The
scale bound [0.1, 0.3] is a hard validity condition, not a clamp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NoiseScaleError, InvalidConfigError
from .fields import Field
from .velocity import TimeSchedule, VelocityField, forward_noise, sample

SCALE_MIN = 0.1
SCALE_MAX = 0.3


@dataclass
class Candidate:
    id: int
    field: Field
    source: str
    noise_scale: Optional[float] = None
    seed: Optional[int] = None


@dataclass
class CandidateSet:
    restored: Field
    candidates: list[Candidate]

    def __post_init__(self):
        if not self.candidates or self.candidates[0].source != "original":
            raise InvalidConfigError("candidate 0 must be the original restored field")
        if not np.array_equal(self.candidates[0].field.data, self.restored.data):
            raise InvalidConfigError("candidate 0 must equal the restored field exactly")
        ids = [c.id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise InvalidConfigError("candidate ids must be unique")

    def __len__(self) -> int:
        return len(self.candidates)

    def by_id(self, cid: int) -> Candidate:
        for c in self.candidates:
            if c.id == cid:
                return c
        raise KeyError(cid)


def _check_scale(s: float) -> None:
    if not SCALE_MIN <= s <= SCALE_MAX:
        raise NoiseScaleError(
            f"noise scale {s} outside [{SCALE_MIN}, {SCALE_MAX}]"
        )


def derive_seed(master_seed: int, model_index: int, scale_index: int) -> int:
    """Deterministic per-candidate seed from the master seed and the
    candidate's (model, scale) coordinates in declared order."""
    ss = np.random.SeedSequence([int(master_seed), int(model_index), int(scale_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def invert_and_regenerate(
    y0: Field,
    model: VelocityField,
    s: float,
    steps: int,
    seed: int,
) -> Candidate:
    """Noise ``y0`` to scale ``s`` with a seeded draw, then denoise back.

    ``steps`` is the nominal full-schedule step count; the actual run uses
    the knots of that schedule at or below ``s``.
    """
    _check_scale(s)
    rng = np.random.default_rng(seed)
    eps = Field(rng.standard_normal(y0.shape))
    x_s = forward_noise(y0, s, eps)
    out = sample(model, TimeSchedule.uniform(steps), x_s, start_t=s)
    return Candidate(id=-1, field=out, source=model.descriptor, noise_scale=s, seed=seed)


def build_candidate_set(
    y0: Field,
    models: Sequence[VelocityField],
    scales: Sequence[float],
    steps: int,
    seed: int,
) -> CandidateSet:
    """The full preference pool: the original plus one regeneration per
    (model, scale) in declared order."""
    if not models:
        raise InvalidConfigError("need at least one velocity model")
    if not scales:
        raise InvalidConfigError("need at least one noise scale")
    for s in scales:  # fail fast before any work
        _check_scale(s)
    cands = [Candidate(id=0, field=y0.copy(), source="original")]
    next_id = 1
    for mi, model in enumerate(models):
        for si, s in enumerate(scales):
            child_seed = derive_seed(seed, mi, si)
            c = invert_and_regenerate(y0, model, s, steps, child_seed)
            c.id = next_id
            cands.append(c)
            next_id += 1
    return CandidateSet(restored=y0, candidates=cands)
