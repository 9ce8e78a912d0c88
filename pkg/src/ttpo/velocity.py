"""Closed-form flow-matching velocity fields and the Euler sampling
primitives built on them.

Time runs from 1 (pure noise) to 0 (clean data); the noising path is
``x_t = (1-t) x_0 + t eps``, so the conditional velocity along a single
path is ``x_0 - eps`` and a denoising Euler step with ``dt = t - t_next``
is ``x_next = x + dt * v``.

Both analytic fields below realize the exact marginal velocity
``v(x, t) = (E[x_0 | x_t = x] - x) / t`` for their prior:

* ``GaussianMixtureField`` — per-component marginal
  ``x_t | k ~ N((1-t) mu_k, ((1-t)^2 sigma_k^2 + t^2) I)`` with
  responsibilities from those marginals and conditional mean
  ``mu_k + (1-t) sigma_k^2 / ((1-t)^2 sigma_k^2 + t^2) * (x - (1-t) mu_k)``.
* ``EmpiricalDatasetField`` — softmax responsibilities
  ``softmax_i(-||x - (1-t) a_i||^2 / (2 t^2))`` over dataset atoms.

The division by ``t`` makes evaluation near zero ill-posed, hence the
``t_min`` clamp; no schedule here ever *evaluates* a velocity at t = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from . import _kernels
from .errors import InvalidConfigError, InvalidInputError, InvalidScheduleError
from .fields import Field

log = logging.getLogger("ttpo")

DEFAULT_T_MIN = 1e-3


@runtime_checkable
class VelocityField(Protocol):
    """Anything that evaluates a velocity v(x, t) on fields."""

    descriptor: str
    t_min: float

    def evaluate(self, x: Field, t: float) -> Field: ...


def forward_noise(x0: Field, s: float, eps: Field) -> Field:
    """Noising interpolation ``(1-s) x0 + s eps``."""
    if not 0.0 <= s <= 1.0:
        raise InvalidConfigError(f"noise scale must lie in [0, 1], got {s}")
    if x0.shape != eps.shape:
        raise InvalidInputError(f"shape mismatch: {x0.shape} vs {eps.shape}")
    return Field((1.0 - s) * x0.data + s * eps.data)


def euler_step(x: Field, t: float, t_next: float, v: Field) -> Field:
    """One denoising Euler step ``x + (t - t_next) v``."""
    if not (0.0 <= t_next < t <= 1.0):
        raise InvalidScheduleError(f"need 0 <= t_next < t <= 1, got t={t}, t_next={t_next}")
    if x.shape != v.shape:
        raise InvalidInputError(f"shape mismatch: {x.shape} vs {v.shape}")
    return Field(x.data + (t - t_next) * v.data)


def predict_clean(x: Field, t: float, field: VelocityField) -> Field:
    """One-shot extrapolation to t = 0: ``x + t * v(x, t)``.

    Times below the field's ``t_min`` are clamped (with a logged warning)
    rather than rejected, since they only occur on a final partial step.
    """
    if t > 1.0:
        raise InvalidInputError(f"timestep {t} above 1")
    t_min = getattr(field, "t_min", DEFAULT_T_MIN)
    if t < t_min:
        log.warning("predict_clean at t=%.3g below t_min=%.3g; clamping", t, t_min)
        t = t_min
    return Field(x.data + t * field.evaluate(x, t).data)


@dataclass
class GaussianMixtureField:
    """Exact marginal velocity for an isotropic Gaussian-mixture prior.

    ``components`` is a list of ``(weight, mean Field, sigma)``; weights
    must sum to 1 and sigmas must be positive.
    """

    components: list[tuple[float, Field, float]]
    descriptor: str = "gmm"
    t_min: float = DEFAULT_T_MIN

    def __post_init__(self):
        if not self.components:
            raise InvalidConfigError("mixture needs at least one component")
        wsum = sum(w for w, _, _ in self.components)
        if abs(wsum - 1.0) > 1e-12:
            raise InvalidConfigError(f"mixture weights sum to {wsum}, expected 1")
        shape = self.components[0][1].shape
        for w, mu, sigma in self.components:
            if w <= 0:
                raise InvalidConfigError(f"component weight {w} must be positive")
            if sigma <= 0:
                raise InvalidConfigError(f"component sigma {sigma} must be positive")
            if mu.shape != shape:
                raise InvalidInputError("mixture component means must share one shape")
        self._means = np.stack([mu.data.ravel() for _, mu, _ in self.components])
        self._logw = np.log(np.array([w for w, _, _ in self.components]))
        self._sigmas = np.array([s for _, _, s in self.components])
        self._shape = shape

    def posterior_mean(self, x: Field, t: float) -> Field:
        """E[x_0 | x_t = x] under the mixture prior."""
        t = max(float(t), self.t_min)
        n = self._means.shape[1]
        omt = 1.0 - t
        marg_var = omt * omt * self._sigmas**2 + t * t
        centers = omt * self._means
        # responsibility logits = log w_k + log N(x; (1-t) mu_k, marg_var_k I)
        logit_const = self._logw - 0.5 * n * np.log(2.0 * math.pi * marg_var)
        inv2var = 1.0 / (2.0 * marg_var)
        gain = omt * self._sigmas**2 / marg_var
        out, _ = _kernels.posterior_mix(
            np.ascontiguousarray(x.data.ravel()),
            np.ascontiguousarray(centers),
            np.ascontiguousarray(logit_const),
            np.ascontiguousarray(inv2var),
            np.ascontiguousarray(self._means),
            np.ascontiguousarray(gain),
        )
        return Field(out.reshape(self._shape))

    def evaluate(self, x: Field, t: float) -> Field:
        if x.shape != self._shape:
            raise InvalidInputError(f"field shape {x.shape} != prior shape {self._shape}")
        t = max(float(t), self.t_min)
        return Field((self.posterior_mean(x, t).data - x.data) / t)

    def log_density(self, f: Field) -> float:
        """Log density of the prior itself at a clean field (t = 0)."""
        d = f.data.ravel()[None, :] - self._means
        n = self._means.shape[1]
        var = self._sigmas**2
        logp = (
            self._logw
            - 0.5 * n * np.log(2.0 * math.pi * var)
            - np.sum(d * d, axis=1) / (2.0 * var)
        )
        m = logp.max()
        return float(m + np.log(np.sum(np.exp(logp - m))))


@dataclass
class EmpiricalDatasetField:
    """Exact marginal velocity when the prior is a finite set of atoms."""

    atoms: list[Field]
    descriptor: str = "dataset"
    t_min: float = DEFAULT_T_MIN

    def __post_init__(self):
        if not self.atoms:
            raise InvalidConfigError("dataset needs at least one atom")
        shape = self.atoms[0].shape
        for a in self.atoms:
            if a.shape != shape:
                raise InvalidInputError("dataset atoms must share one shape")
        self._atoms = np.stack([a.data.ravel() for a in self.atoms])
        self._shape = shape

    def responsibilities(self, x: Field, t: float) -> np.ndarray:
        _, p = self._mix(x, max(float(t), self.t_min))
        return p

    def _mix(self, x: Field, t: float):
        k = self._atoms.shape[0]
        omt = 1.0 - t
        centers = omt * self._atoms
        return _kernels.posterior_mix(
            np.ascontiguousarray(x.data.ravel()),
            np.ascontiguousarray(centers),
            np.zeros(k),
            np.full(k, 1.0 / (2.0 * t * t)),
            np.ascontiguousarray(self._atoms),
            np.zeros(k),
        )

    def posterior_mean(self, x: Field, t: float) -> Field:
        t = max(float(t), self.t_min)
        out, _ = self._mix(x, t)
        return Field(out.reshape(self._shape))

    def evaluate(self, x: Field, t: float) -> Field:
        if x.shape != self._shape:
            raise InvalidInputError(f"field shape {x.shape} != dataset shape {self._shape}")
        t = max(float(t), self.t_min)
        return Field((self.posterior_mean(x, t).data - x.data) / t)


def gmm_velocity(x: Field, t: float, gmm: GaussianMixtureField) -> Field:
    """Functional alias for ``gmm.evaluate``."""
    return gmm.evaluate(x, t)


def empirical_velocity(x: Field, t: float, ds: EmpiricalDatasetField) -> Field:
    """Functional alias for ``ds.evaluate``."""
    return ds.evaluate(x, t)


@dataclass
class TimeSchedule:
    """Strictly decreasing knots from exactly 1 down to exactly 0."""

    knots: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=np.float64)
        if k.ndim != 1 or k.size < 2:
            raise InvalidScheduleError("schedule needs at least two knots")
        if k[0] != 1.0 or k[-1] != 0.0:
            raise InvalidScheduleError("schedule must start at 1 and end at 0")
        if np.any(np.diff(k) >= 0):
            raise InvalidScheduleError("schedule knots must strictly decrease")
        self.knots = k

    @property
    def steps(self) -> int:
        return self.knots.size - 1

    @classmethod
    def uniform(cls, steps: int) -> "TimeSchedule":
        if steps < 1:
            raise InvalidScheduleError(f"steps must be >= 1, got {steps}")
        return cls(np.linspace(1.0, 0.0, steps + 1))

    def restrict(self, start_t: float) -> np.ndarray:
        """Knots for a run starting at ``start_t``: the start time followed
        by every knot strictly below it (diffusers-style strength slicing)."""
        if not 0.0 < start_t <= 1.0:
            raise InvalidScheduleError(f"start_t must lie in (0, 1], got {start_t}")
        # knots within rounding distance of start_t would create a degenerate
        # micro-interval; drop them
        below = self.knots[self.knots < start_t - 1e-12]
        return np.concatenate(([start_t], below))


def sample(field: VelocityField, schedule: TimeSchedule, x_start: Field, start_t: float = 1.0) -> Field:
    """Euler-integrate the velocity field from ``start_t`` down to 0.

    The velocity is always evaluated at ``max(t, t_min)``; the state update
    uses the true interval, so the integration still terminates exactly at
    t = 0.
    """
    knots = schedule.restrict(start_t)
    if knots.size < 2:
        raise InvalidScheduleError("restricted schedule is empty")
    t_min = getattr(field, "t_min", DEFAULT_T_MIN)
    x = x_start
    for t, t_next in zip(knots[:-1], knots[1:]):
        v = field.evaluate(x, max(float(t), t_min))
        x = euler_step(x, float(t), float(t_next), v)
    return x
