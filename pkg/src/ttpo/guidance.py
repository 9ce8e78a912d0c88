"""Reward-conditioned Euler denoising.

Per step, the clean field is extrapolated as ``x0hat = x + t * v`` with the
velocity treated as a constant (stop-gradient), so the guidance gradient
with respect to the noisy state equals the loss gradient at ``x0hat``.  The
combined loss is

    L_c = alpha * L_pref + L_struct

where the preference term is the negative log-sigmoid of the scaled reward
gap between ``x0hat``'s high-frequency distances to the win/lose fields,
and the structural term is the mean squared low-frequency spectral
difference to the original restored field.  The update is

    x_next = x + (t - t_next) * v - g * grad(L_c)

with three stages gating the active terms: structural only for
``t in (T1, 1]``, both for ``t in (T2, T1]``, preference only for
``t in [0, T2]``.

All gradients are analytic.  Losses flow through ``mask * FFT``, so the
field-space gradient is the real part of the inverse transform of the
spectral gradient under the orthonormal convention; L1's nondifferentiable
points use sign(0) = 0.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit

from . import _kernels
from .errors import (
    GuidanceDivergedError,
    InvalidConfigError,
    InvalidInputError,
    InvalidScheduleError,
    UndefinedSimilarityError,
)
from .fields import Field, gaussian_lowpass_mask
from .velocity import DEFAULT_T_MIN, TimeSchedule, VelocityField, euler_step

log = logging.getLogger("ttpo")

# Desk-scale default for the correction scale g, selected by running the
# bundled sweep (`ttpo gsweep`) on the mixture testbed: grid
# {0.1, 0.3, 1, 3, 10} in 1/dt units (x50 at 50 steps).  See README.
DEFAULT_G = 50.0


@dataclass
class GuidanceConfig:
    alpha: float = 0.5
    beta: float = 1.0
    g: float = DEFAULT_G
    d0: float = 0.9
    t1: float = 0.7
    t2: float = 0.1
    steps: int = 50
    t_min: float = DEFAULT_T_MIN
    distance: str = "l1"  # "l1" | "cosine"
    seed: int = 666666
    # ablation switches (all on for the full method)
    use_preference: bool = True
    use_freq_decomposition: bool = True
    use_stages: bool = True

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta <= 0:
            raise InvalidConfigError(f"beta must be > 0, got {self.beta}")
        if self.g < 0:
            raise InvalidConfigError(f"g must be >= 0, got {self.g}")
        if not 0.0 < self.d0 <= 1.0:
            raise InvalidConfigError(f"d0 must lie in (0, 1], got {self.d0}")
        if not 0.0 <= self.t2 < self.t1 <= 1.0:
            raise InvalidConfigError(
                f"stage bounds need 0 <= t2 < t1 <= 1, got t1={self.t1}, t2={self.t2}"
            )
        if self.steps < 1:
            raise InvalidConfigError(f"steps must be >= 1, got {self.steps}")
        if self.t_min <= 0:
            raise InvalidConfigError(f"t_min must be > 0, got {self.t_min}")
        if self.distance not in ("l1", "cosine"):
            raise InvalidConfigError(f"distance must be l1 or cosine, got {self.distance!r}")

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha, "beta": self.beta, "g": self.g, "d0": self.d0,
            "t1": self.t1, "t2": self.t2, "steps": self.steps, "t_min": self.t_min,
            "distance": self.distance, "seed": self.seed,
            "use_preference": self.use_preference,
            "use_freq_decomposition": self.use_freq_decomposition,
            "use_stages": self.use_stages,
        }

    @classmethod
    def from_json(cls, d: dict) -> "GuidanceConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})

    def active_terms(self, t: float) -> frozenset:
        enabled = {"structural"} | ({"preference"} if self.use_preference else set())
        if not self.use_stages:
            return frozenset(enabled)
        return frozenset(StagePolicy(self.t1, self.t2).active_terms(t) & enabled)


@dataclass(frozen=True)
class StagePolicy:
    """Three-stage gating derived from (T1, T2): structural guidance on
    (T1, 1], both terms on (T2, T1], preference only on [0, T2]."""

    t1: float
    t2: float

    def active_terms(self, t: float) -> set:
        if t > self.t1:
            return {"structural"}
        if t > self.t2:
            return {"structural", "preference"}
        return {"preference"}


@dataclass
class StepRow:
    t: float
    l_ttpo: float
    l_r: float
    d_win: float
    d_lose: float
    grad_norm: float


@dataclass
class RunRecord:
    rows: list[StepRow] = dc_field(default_factory=list)
    terminal: Optional[Field] = None
    config: Optional[GuidanceConfig] = None

    def write_curves_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "L_ttpo", "L_r", "d_win", "d_lose", "grad_norm"])
            for r in self.rows:
                w.writerow([repr(r.t), repr(r.l_ttpo), repr(r.l_r),
                            repr(r.d_win), repr(r.d_lose), repr(r.grad_norm)])
        return path


class _Workspace:
    """Per-run cache: masks and target spectra are fixed, so each step
    costs one forward and one inverse transform."""

    def __init__(self, y0: Field, yw: Field, yl: Field, cfg: GuidanceConfig):
        if not (y0.shape == yw.shape == yl.shape):
            raise InvalidInputError("y0, yw, yl must share one shape")
        self.cfg = cfg
        self.shape = y0.shape
        self.n = y0.data.size
        if cfg.use_freq_decomposition:
            mask = gaussian_lowpass_mask(*y0.shape, cfg.d0)
            self.w_low = mask.weights
            self.w_high = np.ascontiguousarray(mask.highpass)
        else:
            self.w_low = np.ones(y0.shape)
            self.w_high = np.ones(y0.shape)
        self.spec_y0 = np.fft.fft2(y0.data, norm="ortho")
        self.spec_yw = np.fft.fft2(yw.data, norm="ortho")
        self.spec_yl = np.fft.fft2(yl.data, norm="ortho")

    # -- per-target pieces ------------------------------------------------

    def _l1_piece(self, spec_x, spec_y):
        """(distance, spectral gradient factor) for the masked-L1 branch."""
        total, g = _kernels.masked_l1(spec_x - spec_y, self.w_high)
        return total / self.n, g / self.n

    def _cos_piece(self, spec_x, spec_y):
        """(cosine similarity, spectral gradient factor) over high parts."""
        dot, nx2, ny2 = _kernels.masked_dot(spec_x, spec_y, self.w_high)
        na, nb = np.sqrt(nx2), np.sqrt(ny2)
        if na == 0.0 and nb == 0.0:
            raise UndefinedSimilarityError("cosine reward undefined: both high spectra zero")
        if na == 0.0 or nb == 0.0:
            return 0.0, np.zeros(self.shape, dtype=np.complex128)
        cos = dot / (na * nb)
        ghat = self.spec_grad_cos(spec_x, spec_y, cos, na, nb)
        return cos, ghat

    def spec_grad_cos(self, spec_x, spec_y, cos, na, nb):
        a = self.w_high * spec_x
        b = self.w_high * spec_y
        return self.w_high * (b / (na * nb) - cos * a / (na * na))

    def distances(self, spec_x):
        """d(x, yw), d(x, yl) and their spectral gradient factors."""
        if self.cfg.distance == "l1":
            dw, gw = self._l1_piece(spec_x, self.spec_yw)
            dl, gl = self._l1_piece(spec_x, self.spec_yl)
        else:
            dw, gw = self._cos_piece(spec_x, self.spec_yw)
            dl, gl = self._cos_piece(spec_x, self.spec_yl)
        return dw, gw, dl, gl

    def preference(self, spec_x):
        """Preference loss, its spectral gradient, and the raw distances."""
        beta = self.cfg.beta
        dw, gw, dl, gl = self.distances(spec_x)
        if self.cfg.distance == "l1":
            z = beta * (dl - dw)  # reward = -d
            dz_spec = beta * (gl - gw)
        else:
            z = beta * (dw - dl)  # reward = similarity itself
            dz_spec = beta * (gw - gl)
        if not np.isfinite(z):
            raise GuidanceDivergedError(f"non-finite preference logit {z}")
        loss = float(np.logaddexp(0.0, -z))  # -log sigmoid(z)
        grad_spec = -float(expit(-z)) * dz_spec
        return loss, grad_spec, dw, dl

    def structural(self, spec_x):
        """Structural loss and its spectral gradient."""
        total, g = _kernels.masked_sq(spec_x - self.spec_y0, self.w_low)
        return total / self.n, (2.0 / self.n) * g

    def step_terms(self, x0hat: np.ndarray, t: float):
        """Everything guided_step needs: all diagnostics plus the combined
        gradient of the stage-active terms (one inverse transform)."""
        cfg = self.cfg
        spec_x = np.fft.fft2(x0hat, norm="ortho")
        l_pref, pref_spec, dw, dl = self.preference(spec_x)
        l_struct, struct_spec = self.structural(spec_x)
        active = cfg.active_terms(t)
        combined_spec = np.zeros(self.shape, dtype=np.complex128)
        l_c = 0.0
        if "preference" in active:
            combined_spec += cfg.alpha * pref_spec
            l_c += cfg.alpha * l_pref
        if "structural" in active:
            combined_spec += struct_spec
            l_c += l_struct
        grad = np.fft.ifft2(combined_spec, norm="ortho").real
        return {
            "l_ttpo": l_pref, "l_r": l_struct, "d_win": dw, "d_lose": dl,
            "active": active, "l_c": l_c, "grad": grad,
        }


def _grad_field(spec_grad: np.ndarray) -> Field:
    return Field(np.fft.ifft2(spec_grad, norm="ortho").real)


def reward_distance(a: Field, b: Field, cfg: GuidanceConfig) -> tuple[float, Field]:
    """High-frequency distance between two fields and its gradient in ``a``.

    For ``distance="l1"`` this is the componentwise spectral L1 of the
    high parts (the reward is its negation; beta enters only in the
    preference loss).  For ``"cosine"`` it is the high-frequency cosine
    similarity, used directly as the reward.
    """
    ws = _Workspace(b, b, b, cfg)
    spec_a = np.fft.fft2(a.data, norm="ortho")
    if cfg.distance == "l1":
        d, gspec = ws._l1_piece(spec_a, ws.spec_yw)
    else:
        d, gspec = ws._cos_piece(spec_a, ws.spec_yw)
    return d, _grad_field(gspec)


def ttpo_loss(x0hat: Field, yw: Field, yl: Field, cfg: GuidanceConfig) -> tuple[float, Field]:
    """Preference loss ``-log sigmoid(beta * (reward_w - reward_l))`` on the
    high-frequency spectra, with its exact gradient in ``x0hat``."""
    ws = _Workspace(x0hat, yw, yl, cfg)
    loss, grad_spec, _, _ = ws.preference(np.fft.fft2(x0hat.data, norm="ortho"))
    return loss, _grad_field(grad_spec)


def structural_loss(x0hat: Field, y0: Field, cfg: GuidanceConfig) -> tuple[float, Field]:
    """Mean squared low-frequency spectral difference to the restored field,
    with its exact gradient in ``x0hat``."""
    ws = _Workspace(y0, y0, y0, cfg)
    loss, grad_spec = ws.structural(np.fft.fft2(x0hat.data, norm="ortho"))
    return loss, _grad_field(grad_spec)


def combined_guidance(
    x0hat: Field, y0: Field, yw: Field, yl: Field, t: float, cfg: GuidanceConfig
) -> tuple[float, Field, dict]:
    """Stage-gated combination ``alpha * L_pref + L_struct`` at time ``t``.

    The terms record carries one entry per *active* term; inactive terms
    are absent rather than zero.
    """
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"timestep {t} outside [0, 1]")
    ws = _Workspace(y0, yw, yl, cfg)
    out = ws.step_terms(x0hat.data, t)
    terms: dict = {}
    if "preference" in out["active"]:
        terms["preference"] = {
            "loss": out["l_ttpo"], "d_win": out["d_win"], "d_lose": out["d_lose"],
            "weight": cfg.alpha,
        }
    if "structural" in out["active"]:
        terms["structural"] = {"loss": out["l_r"], "weight": 1.0}
    return out["l_c"], Field(out["grad"]), terms


def initial_noise(shape: tuple[int, int], seed: int) -> Field:
    """The seeded standard-normal start state shared by guided and plain runs."""
    return Field(np.random.default_rng(seed).standard_normal(shape))


def guided_step(
    x: Field,
    t: float,
    t_next: float,
    field: VelocityField,
    y0: Field,
    yw: Field,
    yl: Field,
    cfg: GuidanceConfig,
    _ws: Optional[_Workspace] = None,
) -> tuple[Field, StepRow]:
    """One reward-conditioned Euler step.

    The velocity is evaluated once and frozen; ``x0hat = x + t * v`` then has
    identity sensitivity to ``x``, so the applied correction is exactly the
    loss gradient at ``x0hat``.  ``g = 0`` short-circuits to a plain Euler
    step (bit-identical) while still recording the diagnostics.
    """
    if not 0.0 <= t_next < t:
        raise InvalidScheduleError(f"need 0 <= t_next < t, got t={t}, t_next={t_next}")
    ws = _ws if _ws is not None else _Workspace(y0, yw, yl, cfg)
    t_eval = max(t, cfg.t_min)
    try:
        v = field.evaluate(x, t_eval)
    except InvalidInputError as exc:
        # a blown-up state can push the velocity model itself out of range
        raise GuidanceDivergedError(f"velocity evaluation failed at t={t}: {exc}", t=t) from exc
    x0hat = x.data + t_eval * v.data
    if not np.all(np.isfinite(x0hat)):
        raise GuidanceDivergedError(f"non-finite clean prediction at t={t}", t=t)
    out = ws.step_terms(x0hat, t)
    grad = out["grad"]
    grad_norm = float(np.linalg.norm(grad))
    row = StepRow(
        t=float(t), l_ttpo=out["l_ttpo"], l_r=out["l_r"],
        d_win=out["d_win"], d_lose=out["d_lose"], grad_norm=grad_norm,
    )
    if cfg.g == 0.0:
        return euler_step(x, t, t_next, v), row
    x_next = x.data + (t - t_next) * v.data - cfg.g * grad
    if not np.all(np.isfinite(x_next)):
        raise GuidanceDivergedError(
            f"guidance diverged at t={t} (g={cfg.g}, grad_norm={grad_norm:.3g})", t=t
        )
    return Field(x_next), row


def optimize(
    y0: Field, yw: Field, yl: Field, field: VelocityField, cfg: GuidanceConfig
) -> tuple[Field, RunRecord]:
    """Full reward-conditioned denoising from seeded noise at t = 1 to t = 0.

    Deterministic given inputs and config.  On divergence the partial record
    is attached to the raised error so callers can persist it.
    """
    if not (y0.shape == yw.shape == yl.shape):
        raise InvalidInputError("y0, yw, yl must share one shape")
    ws = _Workspace(y0, yw, yl, cfg)
    schedule = TimeSchedule.uniform(cfg.steps)
    x = initial_noise(y0.shape, cfg.seed)
    record = RunRecord(config=cfg)
    for t, t_next in zip(schedule.knots[:-1], schedule.knots[1:]):
        try:
            x, row = guided_step(x, float(t), float(t_next), field, y0, yw, yl, cfg, _ws=ws)
        except GuidanceDivergedError as err:
            err.record = record  # partial rows up to the failed step
            err.step = len(record.rows)
            log.error("optimize aborted at step %d (t=%.4f): %s", len(record.rows), t, err)
            raise
        record.rows.append(row)
    record.terminal = x
    return x, record
