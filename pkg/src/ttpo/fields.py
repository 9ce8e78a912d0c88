"""Real 2-D fields, an orthonormal Fourier transform, Gaussian frequency
masks, and the distance/similarity primitives shared by every loss.

Conventions pinned here and relied on everywhere else:

* The transform is orthonormal (``1/sqrt(n)`` both ways), so Parseval holds
  and loss magnitudes do not drift with resolution.
* Radial frequency ``rho`` is normalized so the per-axis Nyquist frequency
  maps to ``rho = 1``; the Gaussian low-pass weight is
  ``exp(-rho^2 / (2 d0^2))``.
* L1 between spectra acts componentwise on real and imaginary parts, which
  keeps its gradient a per-component sign through the linear transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, UndefinedSimilarityError


@dataclass
class Field:
    """A finite real-valued grid, stored as float64 in row-major order."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidInputError(f"field must be a 2-D grid, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("field contains non-finite values")
        self.data = np.ascontiguousarray(a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @classmethod
    def zeros(cls, height: int, width: int) -> "Field":
        return cls(np.zeros((height, width)))

    @classmethod
    def constant(cls, height: int, width: int, value: float) -> "Field":
        return cls(np.full((height, width), float(value)))

    def copy(self) -> "Field":
        return Field(self.data.copy())


@dataclass
class Spectrum:
    """Complex Fourier coefficients on the same grid as the source field."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise InvalidInputError(f"spectrum must be a 2-D grid, got shape {c.shape}")
        if not np.all(np.isfinite(c.real)) or not np.all(np.isfinite(c.imag)):
            raise InvalidInputError("spectrum contains non-finite values")
        self.coefficients = np.ascontiguousarray(c)

    @property
    def height(self) -> int:
        return self.coefficients.shape[0]

    @property
    def width(self) -> int:
        return self.coefficients.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.coefficients.shape

    def __add__(self, other: "Spectrum") -> "Spectrum":
        return Spectrum(self.coefficients + other.coefficients)


@dataclass
class FreqMask:
    """Gaussian low-pass weights per frequency bin, all in [0, 1].

    The high-pass companion is the exact complement ``1 - weights``; both
    views come from the same array so low + high is 1 at every bin.
    """

    weights: np.ndarray
    cutoff: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise InvalidInputError("mask weights must be a 2-D grid")
        if np.any(w < 0.0) or np.any(w > 1.0):
            raise InvalidInputError("mask weights must lie in [0, 1]")
        self.weights = np.ascontiguousarray(w)

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    @property
    def highpass(self) -> np.ndarray:
        return 1.0 - self.weights


def fft2(f: Field) -> Spectrum:
    """Orthonormal 2-D DFT of a field."""
    return Spectrum(np.fft.fft2(f.data, norm="ortho"))


def ifft2(s: Spectrum) -> Field:
    """Orthonormal inverse DFT, returning the real part.

    Spectra produced from real fields (possibly scaled by radially symmetric
    masks) are Hermitian-symmetric, so the imaginary residue is rounding
    noise only.
    """
    return Field(np.fft.ifft2(s.coefficients, norm="ortho").real)


def radial_frequencies(height: int, width: int) -> np.ndarray:
    """Radial frequency of each DFT bin, with the axis Nyquist at 1.0.

    ``np.fft.fftfreq`` gives per-axis frequencies in cycles/sample
    (Nyquist = 0.5); dividing by 0.5 puts the per-axis Nyquist at 1, so the
    corner bin of an even grid sits at sqrt(2).
    """
    fy = np.fft.fftfreq(height) / 0.5
    fx = np.fft.fftfreq(width) / 0.5
    return np.hypot(fy[:, None], fx[None, :])


def gaussian_mask_weight(rho, d0: float):
    """The low-pass weight ``exp(-rho^2 / (2 d0^2))`` at radial frequency rho."""
    if d0 <= 0.0:
        raise InvalidConfigError(f"cutoff must be positive, got {d0}")
    return np.exp(-np.square(rho) / (2.0 * d0 * d0))


def gaussian_lowpass_mask(height: int, width: int, d0: float) -> FreqMask:
    """Gaussian low-pass mask with normalized cutoff ``d0``.

    The meaningful range is ``0 < d0 <= 1`` (cutoff at or below Nyquist);
    larger values are accepted and degenerate toward an all-ones mask,
    which is occasionally useful in tests.
    """
    if height < 1 or width < 1:
        raise InvalidInputError("mask dimensions must be positive")
    rho = radial_frequencies(height, width)
    return FreqMask(gaussian_mask_weight(rho, d0), cutoff=float(d0))


def identity_mask(height: int, width: int) -> FreqMask:
    """All-pass mask (weight 1 everywhere); used when frequency
    decomposition is disabled so both loss branches see the full spectrum."""
    return FreqMask(np.ones((height, width)), cutoff=float("inf"))


def split_frequency(f: Field, m: FreqMask) -> tuple[Spectrum, Spectrum]:
    """Split a field's spectrum into (low, high) parts with one mask object."""
    if f.shape != m.shape:
        raise InvalidInputError(f"field shape {f.shape} != mask shape {m.shape}")
    s = np.fft.fft2(f.data, norm="ortho")
    return Spectrum(s * m.weights), Spectrum(s * m.highpass)


def _pair_arrays(a, b) -> tuple[np.ndarray, np.ndarray, bool]:
    """Shape-check two Field/Spectrum operands; returns raw arrays and
    whether they are complex spectra."""
    xa = a.coefficients if isinstance(a, Spectrum) else a.data
    xb = b.coefficients if isinstance(b, Spectrum) else b.data
    if xa.shape != xb.shape:
        raise InvalidInputError(f"shape mismatch: {xa.shape} vs {xb.shape}")
    return xa, xb, isinstance(a, Spectrum) or isinstance(b, Spectrum)


def spectral_l1(a: Spectrum, b: Spectrum) -> float:
    """Mean over bins of |d_real| + |d_imag| of the coefficient difference."""
    xa, xb, _ = _pair_arrays(a, b)
    d = xa - xb
    return float(np.mean(np.abs(d.real) + np.abs(d.imag)))


def field_mse(a, b) -> float:
    """Mean squared difference; for spectra the squared modulus per bin."""
    xa, xb, complex_ = _pair_arrays(a, b)
    d = xa - xb
    if complex_:
        return float(np.mean(d.real * d.real + d.imag * d.imag))
    return float(np.mean(d * d))


def cosine_sim(a, b) -> float:
    """Inner product over product of norms, in [-1, 1].

    Spectra are treated as real vectors of stacked (real, imag) parts. Both
    operands zero is undefined; exactly one zero operand returns 0.0 by
    convention (no direction to compare against).
    """
    xa, xb, complex_ = _pair_arrays(a, b)
    if complex_:
        dot = float(np.sum(xa.real * xb.real + xa.imag * xb.imag))
        na = float(np.sqrt(np.sum(xa.real**2 + xa.imag**2)))
        nb = float(np.sqrt(np.sum(xb.real**2 + xb.imag**2)))
    else:
        dot = float(np.sum(xa * xb))
        na = float(np.linalg.norm(xa))
        nb = float(np.linalg.norm(xb))
    if na == 0.0 and nb == 0.0:
        raise UndefinedSimilarityError("cosine similarity of two zero operands")
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(dot / (na * nb), -1.0, 1.0))
