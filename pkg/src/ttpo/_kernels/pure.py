"""Pure-numpy reference implementations of the fused kernels.

Each function mirrors a routine in ``_core.pyx`` exactly; this module is
the fallback backend when the compiled extension is unavailable and the
ground truth the extension is tested against.
"""

from __future__ import annotations

import numpy as np

NAME = "pure"


def masked_l1(delta: np.ndarray, w: np.ndarray):
    """Componentwise L1 of a mask-weighted complex difference.

    Returns ``(total, grad_spec)`` where ``total = sum(|w*re| + |w*im|)``
    over all bins and ``grad_spec = w*sign(w*re) + 1j*w*sign(w*im)`` is the
    spectral-domain gradient factor (before the inverse transform and the
    1/n mean normalization, which the caller applies).
    """
    mre = w * delta.real
    mim = w * delta.imag
    total = float(np.sum(np.abs(mre)) + np.sum(np.abs(mim)))
    grad = w * np.sign(mre) + 1j * (w * np.sign(mim))
    return total, grad


def masked_sq(delta: np.ndarray, w: np.ndarray):
    """Squared modulus of a mask-weighted complex difference.

    Returns ``(total, grad_spec)`` with ``total = sum(w^2 * |delta|^2)`` and
    ``grad_spec = w^2 * delta`` (caller applies 2/n and the inverse
    transform).
    """
    w2 = w * w
    total = float(np.sum(w2 * (delta.real**2 + delta.imag**2)))
    return total, w2 * delta


def masked_dot(x: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Masked real inner product and squared norms of two complex grids.

    Treats each grid as the real vector of stacked (real, imag) parts after
    scaling by ``w``; returns ``(dot, nx2, ny2)``.
    """
    w2 = w * w
    dot = float(np.sum(w2 * (x.real * y.real + x.imag * y.imag)))
    nx2 = float(np.sum(w2 * (x.real**2 + x.imag**2)))
    ny2 = float(np.sum(w2 * (y.real**2 + y.imag**2)))
    return dot, nx2, ny2


def posterior_mix(
    x: np.ndarray,
    centers: np.ndarray,
    logit_const: np.ndarray,
    inv2var: np.ndarray,
    base: np.ndarray,
    gain: np.ndarray,
):
    """Softmax-weighted posterior combination over mixture components.

    ``logits_k = logit_const_k - inv2var_k * ||x - centers_k||^2``;
    responsibilities are ``softmax(logits)`` and the output is
    ``sum_k p_k * (base_k + gain_k * (x - centers_k))``.

    Covers both the Gaussian-mixture posterior mean (gain = shrinkage
    factor) and the finite-dataset posterior mean (gain = 0).  Returns
    ``(out, responsibilities)``.

    Plain IEEE semantics on extreme inputs (inf/nan propagate to the
    caller's finiteness checks), matching the compiled kernel.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        diffs = x[None, :] - centers  # (K, n)
        logits = logit_const - inv2var * np.sum(diffs * diffs, axis=1)
        logits = logits - logits.max()
        p = np.exp(logits)
        p /= p.sum()
        out = p @ base + (p * gain) @ diffs
    return out, p


def tv_sum(x: np.ndarray) -> float:
    """Sum of absolute forward differences along both axes."""
    return float(np.sum(np.abs(np.diff(x, axis=0))) + np.sum(np.abs(np.diff(x, axis=1))))
