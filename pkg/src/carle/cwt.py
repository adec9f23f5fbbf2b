"""Morlet continuous wavelet transform over a rotation-speed-aware scale grid.

The analysed band spans one third of the rotation frequency up to its third
harmonic. Scales are logarithmically spaced between the scales matching the
band edges, a = f_c / (f * T_sampling).

The wavelet phase is exp(1j*2*pi*f_c*tau) by default, which is the form
consistent with that scale-to-frequency map. The variant placing 2*pi in
the denominator of the phase (exp(1j*f_c*tau/(2*pi))) is available with
``two_pi_phase=False``; note its passband does not line up with the grid's
nominal frequencies.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import cwt_scalogram
from .errors import InputError, ParameterError

DEFAULT_CENTER_FREQ = 0.81


def phase_coefficient(center_freq: float, two_pi_phase: bool = True) -> float:
    """Coefficient k in the wavelet phase exp(1j * k * tau)."""
    if two_pi_phase:
        return 2.0 * math.pi * center_freq
    return center_freq / (2.0 * math.pi)


def morlet(t, center_freq: float = DEFAULT_CENTER_FREQ, two_pi_phase: bool = True):
    """Complex sinusoid under a unit-width Gaussian envelope.

    Accepts a scalar or array argument; |morlet(t)| = exp(-t^2/2).
    """
    t = np.asarray(t, dtype=np.float64)
    k = phase_coefficient(center_freq, two_pi_phase)
    value = np.exp(1j * k * t) * np.exp(-0.5 * t * t)
    return complex(value) if value.ndim == 0 else value


@dataclass
class ScaleGrid:
    """Logarithmically spaced wavelet scales with their nominal frequencies."""

    scales: np.ndarray
    freqs_hz: np.ndarray
    center_freq: float
    f_min_hz: float
    f_max_hz: float

    @property
    def count(self) -> int:
        return len(self.scales)


def build_scale_grid(
    f_o: float,
    sample_rate_hz: float,
    n_scales: int = 64,
    center_freq: float = DEFAULT_CENTER_FREQ,
) -> ScaleGrid:
    """Scale grid covering [f_o/3, 3*f_o] with n_scales log-spaced scales."""
    if f_o <= 0:
        raise ParameterError(f"f_o must be positive, got {f_o}")
    if n_scales < 2:
        raise ParameterError(f"n_scales must be >= 2, got {n_scales}")
    if center_freq <= 0:
        raise ParameterError(f"center_freq must be positive, got {center_freq}")
    f_min = f_o / 3.0
    f_max = 3.0 * f_o
    nyquist = sample_rate_hz / 2.0
    if f_max >= nyquist:
        raise ParameterError(
            f"f_max = 3*f_o = {f_max} Hz must stay below the Nyquist frequency "
            f"{nyquist} Hz (sample_rate_hz/2)"
        )
    # descending frequencies give ascending scales; endpoints are exact
    freqs = np.geomspace(f_max, f_min, n_scales)
    scales = center_freq * sample_rate_hz / freqs
    return ScaleGrid(scales, freqs, center_freq, f_min, f_max)


@dataclass
class Scalogram:
    """Wavelet coefficients of one window, shape (n_scales, window_len)."""

    coefficients: np.ndarray
    grid: ScaleGrid

    def __post_init__(self):
        if not np.all(np.isfinite(self.coefficients.real)) or not np.all(
            np.isfinite(self.coefficients.imag)
        ):
            raise InputError("scalogram contains non-finite coefficients")


def transform(
    window_samples,
    grid: ScaleGrid,
    sample_rate_hz: float,
    two_pi_phase: bool = True,
) -> Scalogram:
    """Wavelet coefficients of one window channel over the whole scale grid.

    Coefficients carry 1/sqrt(scale) amplitude normalisation so per-scale
    energies are comparable; the signal is treated as zero outside the
    window.
    """
    x = np.asarray(window_samples, dtype=np.float64)
    if x.ndim != 1:
        raise InputError(f"expected a 1-D window channel, got shape {x.shape}")
    if len(x) < 4:
        raise InputError(f"window too short for transform: {len(x)} < 4 samples")
    if grid.count < 2:
        raise ParameterError("scale grid is degenerate (fewer than 2 scales)")
    k = phase_coefficient(grid.center_freq, two_pi_phase)
    coeff = cwt_scalogram(x, grid.scales, k, 1.0 / sample_rate_hz)
    return Scalogram(coeff, grid)
