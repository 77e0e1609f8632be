"""Closed-form first-order perturbation propagation models.

Six models, expanding the loss-normalized propagation equation either in the
Kerr coefficient (gamma family) or in the group-velocity-dispersion parameter
(beta2 family):

* regular perturbation:      A ≈ A0 + θ A1
* logarithmic perturbation:  A ≈ A0 exp(θ A1/A0), pointwise in time
* frequency-log perturbation: same exponential form applied to the spectra

plus the two zeroth-order limits (dispersion-only and the nonlinear-phase
rotation model).  The gamma-family first-order term is a quadrature over the
span; the beta2-family term is fully closed-form in time derivatives of the
input and the loss-weighted distance integrals below.

The exponential forms divide by A0, which is meaningless where A0 vanishes;
both a floor rule (|A0| < eps) and a growth rule (|exp form| > c * |RP form|)
fall back to the regular-perturbation value, and the fraction of replaced
samples/bins is reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import fft as _fft

from .fiber import FiberParams
from .signal import ComplexEnvelope, apply_dispersion

__all__ = [
    "ModelKind",
    "StabilizationConfig",
    "ModelConfig",
    "ModelOutput",
    "TIME_STABILIZATION",
    "FREQ_STABILIZATION",
    "effective_length_integrals",
    "dispersion_only",
    "nlpn",
    "rp_gamma",
    "rp_beta2",
    "lp_gamma",
    "lp_beta2",
    "flp_gamma",
    "flp_beta2",
    "propagate_model",
]


class ModelKind(Enum):
    DISPERSION_ONLY = "disp_only"
    NLPN = "nlpn"
    RP_GAMMA = "rp_gamma"
    RP_BETA2 = "rp_beta2"
    LP_GAMMA = "lp_gamma"
    LP_BETA2 = "lp_beta2"
    FLP_GAMMA = "flp_gamma"
    FLP_BETA2 = "flp_beta2"

    @classmethod
    def from_label(cls, label: str) -> "ModelKind":
        for kind in cls:
            if kind.value == label:
                return kind
        raise ValueError(f"unknown model kind {label!r}")


@dataclass(frozen=True)
class StabilizationConfig:
    """Fallback thresholds: floor eps = max|A0| / eps_divisor, growth factor c."""

    c: float = 1.15
    eps_divisor: float = 1e5

    def __post_init__(self) -> None:
        if not self.c > 1:
            raise ValueError("c must exceed 1")
        if not self.eps_divisor > 0:
            raise ValueError("eps_divisor must be positive")


#: Defaults for the time-domain exponential models.
TIME_STABILIZATION = StabilizationConfig(c=1.15, eps_divisor=1e5)
#: Defaults for the frequency-domain exponential models.
FREQ_STABILIZATION = StabilizationConfig(c=1.1, eps_divisor=1e6)


@dataclass(frozen=True)
class ModelConfig:
    quad_steps: int = 100
    time_stab: StabilizationConfig = TIME_STABILIZATION
    freq_stab: StabilizationConfig = FREQ_STABILIZATION


@dataclass(frozen=True)
class ModelOutput:
    waveform: ComplexEnvelope
    kind: ModelKind
    stabilized_fraction: float = 0.0


# --- loss-weighted distance integrals -------------------------------------
#
# With the per-distance loss kernel g(u) = (1 - e^{-alpha u}) / alpha (the
# familiar effective length), the model kernels need
#
#     G_k(z) = integral_0^z g(u)^k du,  k = 1, 2, 3,
#
# alongside g(z) itself.  The closed forms cancel catastrophically for small
# alpha*z, so below a switch point they are evaluated from series
# coefficients of ((1 - e^{-x})/x)^k generated once at import time.

_N_SERIES = 24
_X_SWITCH = 0.2


def _series_tables() -> list[np.ndarray]:
    # coefficients of f(x) = (1 - e^{-x})/x, then of f^2 and f^3
    c = np.zeros(_N_SERIES)
    fact = 1.0
    for i in range(_N_SERIES):
        fact *= i + 1
        c[i] = (-1.0) ** i / fact
    tables = [c]
    for _ in range(2):
        tables.append(np.convolve(tables[-1], c)[:_N_SERIES])
    return tables


_F_POW_COEFFS = _series_tables()


def _gk_series(z: float, x: float, k: int) -> float:
    # G_k(z) = z^{k+1} * sum_j coeff_j x^j / (k+1+j)
    coeffs = _F_POW_COEFFS[k - 1]
    j = np.arange(_N_SERIES)
    return z ** (k + 1) * float(np.sum(coeffs * x**j / (k + 1 + j)))


def effective_length_integrals(z: float, alpha: float) -> tuple[float, float, float, float]:
    """(g, G1, G2, G3): effective length and its k-th power integrals at z."""
    if z < 0:
        raise ValueError("distance must be nonnegative")
    if z == 0.0:
        return (0.0, 0.0, 0.0, 0.0)
    x = alpha * z
    if alpha == 0.0:
        g = z
    else:
        g = -np.expm1(-x) / alpha  # stable for all x
    if x < _X_SWITCH:
        return (g, _gk_series(z, x, 1), _gk_series(z, x, 2), _gk_series(z, x, 3))
    e1 = np.exp(-x)
    e2 = e1 * e1
    e3 = e2 * e1
    g1 = (x + e1 - 1.0) / alpha**2
    g2 = (2.0 * x + 4.0 * e1 - e2 - 3.0) / (2.0 * alpha**3)
    g3 = (6.0 * x + 18.0 * e1 - 9.0 * e2 + 2.0 * e3 - 11.0) / (6.0 * alpha**4)
    return (float(g), float(g1), float(g2), float(g3))


# --- first-order terms ------------------------------------------------------


def _gamma_terms(
    x: ComplexEnvelope, fiber: FiberParams, quad_steps: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Zeroth- and first-order gamma-expansion terms.

    A0 is the dispersed input; A1 accumulates the dispersed Kerr mixing term
    e^{-alpha u} D_{z-u}{|A0(u)|^2 A0(u)} over the span by composite
    trapezoid with quad_steps nodes.  Returns (A0, A1) in time and their raw
    spectra (common scale factors cancel in every downstream use).
    """
    if quad_steps < 2:
        raise ValueError("quad_steps must be >= 2")
    z = fiber.length
    w = x.omega
    spec_in = _fft.ifft(x.samples)
    w2 = 0.5 * fiber.beta2 * w * w
    a0_spec = spec_in * np.exp(1j * w2 * z)

    nodes = np.linspace(0.0, z, quad_steps)
    h = z / (quad_steps - 1)
    weights = np.full(quad_steps, h)
    weights[0] = weights[-1] = 0.5 * h

    acc = np.zeros_like(spec_in)
    for u, wt in zip(nodes, weights):
        a0_u = _fft.fft(spec_in * np.exp(1j * w2 * u))
        cubic = (a0_u.real * a0_u.real + a0_u.imag * a0_u.imag) * a0_u
        acc += (wt * np.exp(-fiber.alpha * u)) * (
            np.exp(1j * w2 * (z - u)) * _fft.ifft(cubic)
        )
    a1_spec = 1j * acc
    return _fft.fft(a0_spec), _fft.fft(a1_spec), a0_spec, a1_spec


def _beta2_terms(
    x: ComplexEnvelope, fiber: FiberParams
) -> tuple[np.ndarray, np.ndarray]:
    """Zeroth- and first-order beta2-expansion terms (time domain).

    The zeroth order is the nonlinear phase rotation of the input; the first
    order is closed-form in the input's time derivatives.  Intensity
    derivatives use the identities d|A|²/dt = 2 Re{A* A'} and
    d²|A|²/dt² = 2 Re{A* A''} + 2|A'|², so only derivatives of A itself are
    ever taken (spectrally exact on the band-limited grid).
    """
    z = fiber.length
    gamma = fiber.gamma
    a = x.samples
    w = x.omega
    spec = _fft.ifft(a)
    da = _fft.fft(spec * (-1j * w))
    d2a = _fft.fft(spec * (-w * w))

    inten = a.real * a.real + a.imag * a.imag
    d_inten = 2.0 * (a.conj() * da).real
    d2_inten = 2.0 * (a.conj() * d2a).real + 2.0 * (da.real * da.real + da.imag * da.imag)

    m_t = 0.5j * d2a
    r_t = 0.5 * gamma * a * d2_inten + gamma * da * d_inten
    p_t = 0.5j * gamma * gamma * a * d_inten * d_inten

    g, g1, g2, g3 = effective_length_integrals(z, fiber.alpha)
    v_t = g * (m_t * z - g1 * r_t - g2 * p_t) - g1 * m_t + g2 * r_t + g3 * p_t
    b_t = -m_t * z + g1 * r_t + g2 * p_t - 2j * gamma * a * (a.conj() * v_t).real

    rot = np.exp((1j * gamma * g) * inten)
    return a * rot, b_t * rot


# --- stabilized exponential assembly ---------------------------------------


def _stabilized_exponential(
    base: np.ndarray, first: np.ndarray, theta: float, stab: StabilizationConfig
) -> tuple[np.ndarray, float]:
    """A0 exp(θ A1/A0) with RP fallback; returns (values, replaced fraction)."""
    rp = base + theta * first
    mag = np.abs(base)
    peak = float(mag.max())
    if peak == 0.0:
        return rp, 1.0
    small = mag < (peak / stab.eps_divisor)
    expo = (theta * first) / np.where(small, 1.0, base)
    # clip keeps exp() finite; clipped points are huge and caught by the growth rule
    lp = base * np.exp(np.clip(expo.real, -745.0, 709.0) + 1j * expo.imag)
    replace = small | (np.abs(lp) > stab.c * np.abs(rp))
    out = np.where(replace, rp, lp)
    return out, float(np.mean(replace))


# --- the six models ----------------------------------------------------------


def dispersion_only(x: ComplexEnvelope, fiber: FiberParams) -> ModelOutput:
    """Exact solution with the Kerr term removed."""
    return ModelOutput(
        apply_dispersion(x, fiber.beta2, fiber.length), ModelKind.DISPERSION_ONLY
    )


def nlpn(x: ComplexEnvelope, fiber: FiberParams) -> ModelOutput:
    """Exact solution with dispersion removed: pure nonlinear phase rotation."""
    g, _, _, _ = effective_length_integrals(fiber.length, fiber.alpha)
    a = x.samples
    inten = a.real * a.real + a.imag * a.imag
    out = a * np.exp((1j * fiber.gamma * g) * inten)
    return ModelOutput(x.with_samples(out), ModelKind.NLPN)


def rp_gamma(
    x: ComplexEnvelope, fiber: FiberParams, quad_steps: int = 100
) -> ModelOutput:
    a0, a1, _, _ = _gamma_terms(x, fiber, quad_steps)
    return ModelOutput(x.with_samples(a0 + fiber.gamma * a1), ModelKind.RP_GAMMA)


def rp_beta2(x: ComplexEnvelope, fiber: FiberParams) -> ModelOutput:
    a0, a1 = _beta2_terms(x, fiber)
    return ModelOutput(x.with_samples(a0 + fiber.beta2 * a1), ModelKind.RP_BETA2)


def lp_gamma(
    x: ComplexEnvelope,
    fiber: FiberParams,
    quad_steps: int = 100,
    stab: StabilizationConfig = TIME_STABILIZATION,
) -> ModelOutput:
    a0, a1, _, _ = _gamma_terms(x, fiber, quad_steps)
    out, frac = _stabilized_exponential(a0, a1, fiber.gamma, stab)
    return ModelOutput(x.with_samples(out), ModelKind.LP_GAMMA, frac)


def lp_beta2(
    x: ComplexEnvelope,
    fiber: FiberParams,
    stab: StabilizationConfig = TIME_STABILIZATION,
) -> ModelOutput:
    a0, a1 = _beta2_terms(x, fiber)
    out, frac = _stabilized_exponential(a0, a1, fiber.beta2, stab)
    return ModelOutput(x.with_samples(out), ModelKind.LP_BETA2, frac)


def flp_gamma(
    x: ComplexEnvelope,
    fiber: FiberParams,
    quad_steps: int = 100,
    stab: StabilizationConfig = FREQ_STABILIZATION,
) -> ModelOutput:
    _, _, a0_spec, a1_spec = _gamma_terms(x, fiber, quad_steps)
    out_spec, frac = _stabilized_exponential(a0_spec, a1_spec, fiber.gamma, stab)
    return ModelOutput(x.with_samples(_fft.fft(out_spec)), ModelKind.FLP_GAMMA, frac)


def flp_beta2(
    x: ComplexEnvelope,
    fiber: FiberParams,
    stab: StabilizationConfig = FREQ_STABILIZATION,
) -> ModelOutput:
    a0, a1 = _beta2_terms(x, fiber)
    out_spec, frac = _stabilized_exponential(
        _fft.ifft(a0), _fft.ifft(a1), fiber.beta2, stab
    )
    return ModelOutput(x.with_samples(_fft.fft(out_spec)), ModelKind.FLP_BETA2, frac)


def propagate_model(
    x: ComplexEnvelope,
    fiber: FiberParams,
    kind: ModelKind,
    cfg: ModelConfig = ModelConfig(),
) -> ModelOutput:
    """Uniform dispatch over all model kinds."""
    if kind is ModelKind.DISPERSION_ONLY:
        return dispersion_only(x, fiber)
    if kind is ModelKind.NLPN:
        return nlpn(x, fiber)
    if kind is ModelKind.RP_GAMMA:
        return rp_gamma(x, fiber, cfg.quad_steps)
    if kind is ModelKind.RP_BETA2:
        return rp_beta2(x, fiber)
    if kind is ModelKind.LP_GAMMA:
        return lp_gamma(x, fiber, cfg.quad_steps, cfg.time_stab)
    if kind is ModelKind.LP_BETA2:
        return lp_beta2(x, fiber, cfg.time_stab)
    if kind is ModelKind.FLP_GAMMA:
        return flp_gamma(x, fiber, cfg.quad_steps, cfg.freq_stab)
    if kind is ModelKind.FLP_BETA2:
        return flp_beta2(x, fiber, cfg.freq_stab)
    raise ValueError(f"unhandled model kind {kind!r}")
