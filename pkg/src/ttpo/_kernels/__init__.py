"""Kernel backend selection.

The fused inner-loop kernels exist twice: a Cython extension
(``ttpo._kernels._core``) and a pure-numpy fallback with identical
semantics.  The compiled backend is preferred when importable; set
``TTPO_KERNELS=pure`` or ``TTPO_KERNELS=compiled`` to force a choice
(forcing ``compiled`` raises if the extension is missing).
``BACKEND`` names whichever backend won.
"""

from __future__ import annotations

import os

from . import pure as _pure

_requested = os.environ.get("TTPO_KERNELS", "auto").lower()

if _requested not in ("auto", "pure", "compiled"):
    raise ValueError(f"TTPO_KERNELS must be auto|pure|compiled, got {_requested!r}")

if _requested == "pure":
    _impl = _pure
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _pure

BACKEND: str = _impl.NAME

masked_l1 = _impl.masked_l1
masked_sq = _impl.masked_sq
masked_dot = _impl.masked_dot
posterior_mix = _impl.posterior_mix
tv_sum = _impl.tv_sum

__all__ = [
    "BACKEND",
    "masked_l1",
    "masked_sq",
    "masked_dot",
    "posterior_mix",
    "tv_sum",
]
