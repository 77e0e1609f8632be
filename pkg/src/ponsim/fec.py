"""Hard-decision Reed-Solomon FEC layer: post-FEC BER formula, rate search,
achievable-rate expressions, and a Monte-Carlo bounded-distance oracle.

The post-FEC bit error rate of RS(n, k) over a binary symmetric channel with
bounded-distance decoding is

    p_pos = (1/n) * sum_{r=t+1}^{n} (p*r/p_s + 1/(2*(t-1)!)) * C(n,r) * p_s^r * (1-p_s)^{n-r}

with t = floor((n-k)/2), symbol error probability p_s = 1-(1-p)^m and m bits
per RS symbol.  The first factor is decoder pass-through of channel errors,
the second a miscorrection surrogate.  Everything is evaluated in the log
domain so the 1e-12 threshold regime is exact in 64-bit floats.

The Monte-Carlo oracle replays the same accounting at the symbol-error level
(a codeword decodes iff at most t symbols are corrupted), so no Galois-field
algebra is needed; it accepts either i.i.d. BSC flips or an externally
produced bit-error stream (e.g. from the fiber chain), with a seeded uniform
bit interleaver over whole codeword frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "RsCode",
    "AirResult",
    "OracleResult",
    "post_fec_ber",
    "find_max_k",
    "air_rs",
    "air_th",
    "binary_entropy",
    "bsc_rs_oracle",
    "predicted_failure_stats",
]


@dataclass(frozen=True)
class RsCode:
    """RS(n, k) over GF(2^m); t symbols correctable."""

    n: int = 255
    k: int = 223

    def __post_init__(self) -> None:
        if self.n != 255:
            raise ValueError("codeword length is fixed at 255 symbols")
        if not 1 <= self.k <= 253:
            raise ValueError("k must lie in [1, 253]")

    @property
    def t(self) -> int:
        return (self.n - self.k) // 2

    @property
    def m(self) -> int:
        return math.ceil(math.log2(self.n + 1))


@dataclass(frozen=True)
class AirResult:
    p: float
    p_pos: float
    k_star: int | None
    air_rs: float
    air_th: float


def post_fec_ber(p: float, code: RsCode) -> float:
    """Post-FEC BER for pre-FEC BER p; clamped to [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p == 0.0:
        return 0.0
    n, t, m = code.n, code.t, code.m
    log_one_minus_ps = m * math.log1p(-p) if p < 1.0 else -math.inf
    p_s = -math.expm1(log_one_minus_ps) if p < 1.0 else 1.0
    log_ps = math.log(p_s)
    r = np.arange(t + 1, n + 1, dtype=np.float64)
    log_binom = gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)
    tail = np.zeros_like(r)
    tail[r < n] = (n - r[r < n]) * log_one_minus_ps  # avoids 0 * -inf at r = n
    log_pmf = log_binom + r * log_ps + tail
    miscorrect = 1.0 / (2.0 * math.gamma(t))  # 1/(2*(t-1)!)
    factor = (p / p_s) * r + miscorrect
    total = float(np.sum(np.exp(log_pmf) * factor) / n)
    return min(max(total, 0.0), 1.0)


_monotone_checked = False


def _check_monotone_in_k() -> None:
    """One-time dense-scan self-test: p_pos nondecreasing in k at fixed p."""
    global _monotone_checked
    if _monotone_checked:
        return
    for p in (1e-4, 1e-3, 1e-2, 0.2):
        prev = -1.0
        for k in range(1, 254):
            val = post_fec_ber(p, RsCode(255, k))
            if val < prev * (1.0 - 1e-12):
                raise AssertionError(
                    f"post_fec_ber not monotone in k at p={p}, k={k}"
                )
            prev = max(prev, val)
    _monotone_checked = True


def find_max_k(p: float, threshold: float = 1e-12) -> int | None:
    """Largest k in [1, 253] with post-FEC BER below threshold, or None.

    Binary search; validity rests on monotonicity of p_pos in k, asserted by
    a one-time dense scan on first use.
    """
    _check_monotone_in_k()
    if post_fec_ber(p, RsCode(255, 1)) >= threshold:
        return None
    lo, hi = 1, 253  # invariant: lo passes, hi+1 would fail or hi untested
    if post_fec_ber(p, RsCode(255, 253)) < threshold:
        return 253
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if post_fec_ber(p, RsCode(255, mid)) < threshold:
            lo = mid
        else:
            hi = mid
    return lo


def air_rs(k: int | None, bits_per_symbol: int = 2) -> float:
    """Achievable rate of the RS system: log2(M) * k/n (bits/symbol)."""
    if k is None:
        return 0.0
    return bits_per_symbol * k / 255.0


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p))


def air_th(p: float, bits_per_symbol: int = 2) -> float:
    """Hard-decision theoretical rate bound: log2(M) * (1 - Hb(p))."""
    return bits_per_symbol * (1.0 - binary_entropy(p))


# --- Monte-Carlo bounded-distance oracle -------------------------------------


@dataclass(frozen=True)
class OracleResult:
    p_pos: float
    sigma: float
    failures: int
    codewords: int
    info_bits: int


def _miscorrection_surrogate(code: RsCode) -> float:
    # expected extra info-bit errors charged per decoding failure
    return code.k * code.m / (2.0 * code.n * math.gamma(code.t))


def _decode_frames(flips: np.ndarray, code: RsCode) -> tuple[np.ndarray, int]:
    """Per-codeword info-bit error counts under bounded-distance decoding.

    flips: bool array (codewords, n, m) of post-deinterleaver channel errors.
    """
    symbol_err = flips.any(axis=2)
    r = symbol_err.sum(axis=1)
    failed = r > code.t
    errors = np.zeros(flips.shape[0])
    if failed.any():
        errors[failed] = flips[failed, : code.k, :].sum(axis=(1, 2))
        errors[failed] += _miscorrection_surrogate(code)
    return errors, int(failed.sum())


def bsc_rs_oracle(
    code: RsCode,
    codewords: int,
    seed: int,
    p: float | None = None,
    flips: np.ndarray | None = None,
    frame_codewords: int = 64,
    interleave: bool = True,
) -> OracleResult:
    """Measured post-FEC info-bit error rate from simulation.

    Either draw i.i.d. BSC(p) flips or consume an external bit-error stream
    `flips` (bool array, trimmed to whole frames).  A seeded uniform random
    bit permutation per frame models the interleaver/deinterleaver pair.
    """
    if codewords < 1 and flips is None:
        raise ValueError("codewords must be >= 1")
    if (p is None) == (flips is None):
        raise ValueError("exactly one of p, flips must be given")
    rng = np.random.default_rng(seed)
    bits_per_cw = code.n * code.m

    if flips is not None:
        flips = np.asarray(flips, dtype=bool).reshape(-1)
        codewords = flips.size // bits_per_cw
        if codewords < 1:
            raise ValueError("flip stream shorter than one codeword")

    frame_codewords = min(frame_codewords, codewords)
    total_err = 0.0
    total_cw = 0
    failures = 0
    sum_sq = 0.0
    while total_cw < codewords:
        f_cw = min(frame_codewords, codewords - total_cw)
        f_bits = f_cw * bits_per_cw
        if flips is None:
            frame = rng.random(f_bits) < p
        else:
            frame = flips[total_cw * bits_per_cw : total_cw * bits_per_cw + f_bits]
        if interleave:
            frame = frame[rng.permutation(f_bits)]
        errors, nf = _decode_frames(frame.reshape(f_cw, code.n, code.m), code)
        total_err += float(errors.sum())
        sum_sq += float((errors * errors).sum())
        failures += nf
        total_cw += f_cw

    info_bits = total_cw * code.k * code.m
    p_pos = total_err / info_bits
    mean_cw = total_err / total_cw
    var_cw = max(sum_sq / total_cw - mean_cw * mean_cw, 0.0)
    sigma = math.sqrt(var_cw / total_cw) / (code.k * code.m)
    return OracleResult(p_pos, sigma, failures, total_cw, info_bits)


def predicted_failure_stats(
    p: float, code: RsCode, codewords: int
) -> tuple[float, float, float]:
    """Model-side moments for comparing a finite oracle run against the formula.

    Returns (expected p_pos, sigma of the p_pos estimate, expected failures)
    under the same pass-through + surrogate accounting the oracle uses.
    """
    n, t, m, k = code.n, code.t, code.m, code.k
    if p == 0.0:
        return 0.0, 0.0, 0.0
    p_s = -math.expm1(m * math.log1p(-p))
    r = np.arange(t + 1, n + 1, dtype=np.float64)
    log_binom = gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)
    tail = np.where(r < n, (n - r) * math.log1p(-p) * m, 0.0)
    pmf = np.exp(log_binom + r * math.log(p_s) + tail)
    c_bar = k * m * r * p / (n * p_s) + _miscorrection_surrogate(code)
    mean_cw = float(np.sum(pmf * c_bar))
    # second moment approximated by c_bar^2 + c_bar (Poisson-like spread
    # within a failure); dominated by the failure Bernoulli either way
    second = float(np.sum(pmf * (c_bar * c_bar + c_bar)))
    var_cw = max(second - mean_cw * mean_cw, 0.0)
    info_bits_per_cw = k * m
    exp_p_pos = mean_cw / info_bits_per_cw
    sigma = math.sqrt(var_cw / codewords) / info_bits_per_cw
    lam = float(np.sum(pmf)) * codewords
    return exp_p_pos, sigma, lam
