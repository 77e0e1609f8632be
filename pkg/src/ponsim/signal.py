"""Complex baseband fields on periodic grids and their spectral operators.

The field convention used throughout the package: a waveform is a uniformly
sampled complex envelope A(t) in sqrt(W) on a circular time grid of duration
n*dt.  The forward transform is  Ã(ω) = ∫ A(t) e^{+jωt} dt  and the inverse
carries the 1/(2π) factor; every spectral operator in the package (derivative,
dispersion, perturbation kernels) is derived from this one convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

__all__ = [
    "ComplexEnvelope",
    "SpectralEnvelope",
    "Grid",
    "angular_frequencies",
    "forward_transform",
    "inverse_transform",
    "spectral_derivative",
    "apply_dispersion",
    "energy",
    "spectral_energy",
    "nsd",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def angular_frequencies(n: int, dt: float) -> np.ndarray:
    """Angular-frequency grid (rad/s) in FFT order for an n-point grid."""
    return 2.0 * np.pi * _fft.fftfreq(n, d=dt)


@dataclass(frozen=True)
class ComplexEnvelope:
    """Sampled complex field A(t); immutable, circular boundary semantics.

    samples : complex amplitudes in sqrt(W), length a power of two
    dt      : sample spacing in seconds
    """

    samples: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=np.complex128, copy=True)
        if arr.ndim != 1 or not _is_power_of_two(arr.size):
            raise ValueError("sample count must be a power of two >= 2")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive and finite")
        if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
            raise ValueError("samples must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.n * self.dt

    @property
    def omega(self) -> np.ndarray:
        return angular_frequencies(self.n, self.dt)

    def with_samples(self, samples: np.ndarray) -> "ComplexEnvelope":
        """New envelope on the same grid."""
        return ComplexEnvelope(samples, self.dt)


@dataclass(frozen=True)
class SpectralEnvelope:
    """Spectral coefficients Ã(ω) on the FFT-ordered angular-frequency grid."""

    coefficients: np.ndarray
    d_omega: float

    def __post_init__(self) -> None:
        arr = np.array(self.coefficients, dtype=np.complex128, copy=True)
        if arr.ndim != 1 or not _is_power_of_two(arr.size):
            raise ValueError("coefficient count must be a power of two >= 2")
        if not (np.isfinite(self.d_omega) and self.d_omega > 0):
            raise ValueError("d_omega must be positive and finite")
        arr.flags.writeable = False
        object.__setattr__(self, "coefficients", arr)
        object.__setattr__(self, "d_omega", float(self.d_omega))

    @property
    def n(self) -> int:
        return self.coefficients.size

    @property
    def omega(self) -> np.ndarray:
        dt = 2.0 * np.pi / (self.n * self.d_omega)
        return angular_frequencies(self.n, dt)


@dataclass(frozen=True)
class Grid:
    """Sampling layout tying the time grid to the symbol clock.

    Invariant: dt * samples_per_symbol * symbol_rate == 1.
    """

    n: int
    dt: float
    symbol_rate: float
    samples_per_symbol: int

    def __post_init__(self) -> None:
        if not _is_power_of_two(self.n):
            raise ValueError("grid size must be a power of two >= 2")
        if self.samples_per_symbol < 1 or self.n % self.samples_per_symbol:
            raise ValueError("samples_per_symbol must divide the grid size")
        rel = abs(self.dt * self.samples_per_symbol * self.symbol_rate - 1.0)
        if rel > 1e-9:
            raise ValueError("dt * samples_per_symbol * symbol_rate must equal 1")

    @classmethod
    def for_symbols(
        cls, n_symbols: int, samples_per_symbol: int, symbol_rate: float
    ) -> "Grid":
        dt = 1.0 / (symbol_rate * samples_per_symbol)
        return cls(n_symbols * samples_per_symbol, dt, symbol_rate, samples_per_symbol)

    @property
    def n_symbols(self) -> int:
        return self.n // self.samples_per_symbol


def forward_transform(x: ComplexEnvelope) -> SpectralEnvelope:
    """Ã(ω) = ∫ A(t) e^{+jωt} dt discretized on the periodic grid.

    With the +jωt kernel the discrete forward transform is the (unnormalized)
    inverse FFT scaled by dt.
    """
    coeffs = _fft.ifft(x.samples) * (x.n * x.dt)
    return SpectralEnvelope(coeffs, 2.0 * np.pi / (x.n * x.dt))


def inverse_transform(s: SpectralEnvelope) -> ComplexEnvelope:
    """A(t) = (1/2π) ∫ Ã(ω) e^{-jωt} dω on the matching time grid."""
    dt = 2.0 * np.pi / (s.n * s.d_omega)
    samples = _fft.fft(s.coefficients) / (s.n * dt)
    return ComplexEnvelope(samples, dt)


def _spectrum(x: ComplexEnvelope) -> np.ndarray:
    # raw ifft; the n*dt scale cancels in multiply-and-invert round trips
    return _fft.ifft(x.samples)


def _from_spectrum(spec: np.ndarray, dt: float) -> ComplexEnvelope:
    return ComplexEnvelope(_fft.fft(spec), dt)


def spectral_derivative(x: ComplexEnvelope, order: int) -> ComplexEnvelope:
    """order-th time derivative via multiplication by (−jω)^order."""
    if order not in (1, 2, 3):
        raise ValueError(f"unsupported derivative order {order!r}")
    mult = (-1j * x.omega) ** order
    return _from_spectrum(_spectrum(x) * mult, x.dt)


def apply_dispersion(
    x: ComplexEnvelope, beta2: float, z: float, beta3: float = 0.0
) -> ComplexEnvelope:
    """All-pass dispersion over distance z: multiply Ã(ω) by the phase factor
    exp(+j β₂ ω² z / 2 + j β₃ ω³ z / 6) required by the +jωt transform
    convention applied to the linear propagation terms.
    """
    if z < 0:
        raise ValueError("propagation distance must be nonnegative")
    if z == 0 or (beta2 == 0 and beta3 == 0):
        return x
    w = x.omega
    phase = (0.5 * beta2 * z) * w * w
    if beta3 != 0.0:
        phase = phase + (beta3 * z / 6.0) * w * w * w
    return _from_spectrum(_spectrum(x) * np.exp(1j * phase), x.dt)


def energy(x: ComplexEnvelope) -> float:
    """Signal energy ∫|A|² dt = Σ|samples|² dt (joules)."""
    s = x.samples
    return float(np.sum(s.real * s.real + s.imag * s.imag) * x.dt)


def spectral_energy(s: SpectralEnvelope) -> float:
    """Parseval partner of :func:`energy`: (1/2π) Σ|Ã|² dω."""
    c = s.coefficients
    return float(np.sum(c.real * c.real + c.imag * c.imag) * s.d_omega / (2.0 * np.pi))


def nsd(model_out: ComplexEnvelope, reference: ComplexEnvelope) -> float:
    """Normalized squared deviation ∫|A_M − A|² dt / ∫|A|² dt (fraction).

    Callers that report in percent multiply by 100.
    """
    if model_out.n != reference.n or abs(model_out.dt - reference.dt) > 1e-12 * reference.dt:
        raise ValueError("waveforms must share the same grid")
    ref = energy(reference)
    if ref == 0.0:
        raise ValueError("reference waveform has zero energy")
    diff = model_out.samples - reference.samples
    num = float(np.sum(diff.real * diff.real + diff.imag * diff.imag) * reference.dt)
    return num / ref
