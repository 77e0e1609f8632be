"""Acceptance gate: every headline behavior at its pinned tolerance.

Each test prints one ``ACCEPTANCE criterion N: PASS`` line (run with ``-s``
to see them live).  Heavy sweeps are shared across criteria through
session-scoped fixtures; set PONSIM_ACCEPT_CACHE to a directory to reuse
completed sweep cells across repeated runs.
"""

import os
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq

from ponsim.analysis import crossing_power, crossover_power, curve, loglog_slope, ratio_at
from ponsim.config import ExperimentConfig
from ponsim.detection import detect_pw, train_hb
from ponsim.fec import RsCode, air_th, bsc_rs_oracle, find_max_k, post_fec_ber
from ponsim.fiber import SsfmConfig, convergence_check, propagate
from ponsim.models import (
    ModelKind,
    dispersion_only,
    flp_beta2,
    flp_gamma,
    lp_beta2,
    lp_gamma,
    nlpn,
    rp_beta2,
    rp_gamma,
)
from ponsim.signal import ComplexEnvelope, Grid, apply_dispersion, energy, forward_transform, inverse_transform, nsd, spectral_energy
from ponsim.experiments import (
    run_ber_sweep,
    run_air_sweep,
    run_nsd_sweep,
    run_nsd_vs_b2,
    run_rs_chain_validation,
)
from ponsim.transceiver import PulseShape, c_band_fiber, gray_qpsk, make_frame, modulate

GAMMA_MODELS = (ModelKind.RP_GAMMA, ModelKind.LP_GAMMA, ModelKind.FLP_GAMMA)
BETA2_MODELS = (ModelKind.RP_BETA2, ModelKind.LP_BETA2, ModelKind.FLP_BETA2)


def report(n: int, message: str) -> None:
    print(f"\nACCEPTANCE criterion {n}: PASS — {message}")


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    env = os.environ.get("PONSIM_ACCEPT_CACHE")
    if env:
        os.makedirs(env, exist_ok=True)
        return env
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def cband_nsd_rows(cache_dir):
    """Criterion 3/4 sweep: 5 seeds x 2048 symbols per power, four models."""
    cfg = ExperimentConfig(
        band="C",
        power_sweep_dbm=(5.0, 6.0, 7.0, 7.5, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0),
        models=(ModelKind.RP_GAMMA, ModelKind.LP_GAMMA, ModelKind.RP_BETA2, ModelKind.FLP_BETA2),
        symbols=2048,
        repeats=5,
        ssfm_steps=1000,
        seed=7,
    )
    return run_nsd_sweep(cfg, os.path.join(cache_dir, "nsd_cband.csv")).rows


@pytest.fixture(scope="session")
def oband10_rows(cache_dir):
    cfg = ExperimentConfig(
        band="O",
        tod_enabled=False,
        power_sweep_dbm=(10.0,),
        models=(ModelKind.RP_BETA2, ModelKind.FLP_BETA2),
        symbols=2048,
        repeats=5,
        ssfm_steps=1000,
        seed=7,
    )
    return run_nsd_sweep(cfg, os.path.join(cache_dir, "nsd_oband10.csv")).rows


@pytest.fixture(scope="session")
def beta2_sweep_rows(cache_dir):
    cfg = ExperimentConfig(
        band="C",
        power_sweep_dbm=(10.0,),
        beta2_sweep_ps2_km=(0.2, 0.4, 0.8, 1.6, 3.2, 6.4, 12.8, 21.67),
        models=(ModelKind.RP_GAMMA, ModelKind.LP_GAMMA, ModelKind.RP_BETA2, ModelKind.FLP_BETA2),
        symbols=2048,
        repeats=2,
        ssfm_steps=1000,
        seed=7,
    )
    return run_nsd_vs_b2(cfg, os.path.join(cache_dir, "nsd_vs_b2.csv")).rows


@pytest.fixture(scope="session")
def oband_floor_rows(cache_dir):
    rows = {}
    for tod in (False, True):
        cfg = ExperimentConfig(
            band="O",
            tod_enabled=tod,
            power_sweep_dbm=(0.0, 2.0, 3.0, 12.0, 16.0, 20.0),
            models=BETA2_MODELS[:1] + (ModelKind.LP_GAMMA, ModelKind.FLP_BETA2),
            symbols=2048,
            repeats=3,
            ssfm_steps=1000,
            seed=7,
        )
        name = "nsd_oband_tod.csv" if tod else "nsd_oband_notod.csv"
        rows[tod] = run_nsd_sweep(cfg, os.path.join(cache_dir, name)).rows
    return rows


def _ber_cfg(powers, test_symbols, train_symbols, engines, seed=11):
    return ExperimentConfig(
        band="C",
        power_sweep_dbm=powers,
        symbols=2048,
        ssfm_steps=500,
        train_symbols=train_symbols,
        test_symbols=test_symbols,
        detector_engines=engines,
        seed=seed,
    )


@pytest.fixture(scope="session")
def ber_rows(cache_dir):
    """Criterion 7/9 sweep, three segments sharing one seed.

    Criterion-7 powers carry 2^20 test symbols and 1e6 training per engine;
    the crossing-only midpoint uses 2^19; the high-power tail (BER >= 1e-3)
    uses 2^18 with reduced training since only the reference-trained detector
    feeds criterion 9 there.
    """
    engines = ("ssfm", "flp_beta2", "lp_gamma")
    segments = [
        ("ber_main.csv", _ber_cfg((15.0, 16.0), 1_048_576, 1_000_000, engines)),
        ("ber_mid.csv", _ber_cfg((15.5,), 524_288, 1_000_000, engines)),
        (
            "ber_high.csv",
            _ber_cfg((16.5, 17.0, 17.5, 18.0, 18.5, 19.0), 262_144, 400_000, ("ssfm",)),
        ),
    ]
    rows = []
    for name, cfg in segments:
        rows.extend(run_ber_sweep(cfg, os.path.join(cache_dir, name)).rows)
    return rows


@pytest.fixture(scope="session")
def air_rows(cache_dir, ber_rows):
    cfg = _ber_cfg((15.0,), 1, 1, ("ssfm",))
    stores = []
    for name in ("ber_main.csv", "ber_mid.csv", "ber_high.csv"):
        stores.extend(
            run_air_sweep(cfg, os.path.join(cache_dir, name), os.path.join(cache_dir, "air_" + name)).rows
        )
    return stores


def pre_fec_threshold(k: int, post: float = 1e-12) -> float:
    code = RsCode(255, k)
    return float(brentq(lambda p: post_fec_ber(p, code) - post, 1e-9, 0.4, xtol=1e-12))


def qpsk_frame(n_symbols, power_dbm, seed):
    rng = np.random.default_rng(seed)
    grid = Grid.for_symbols(n_symbols, 16, 10e9)
    frame = make_frame(n_symbols, 32, rng)
    return modulate(frame.bits, gray_qpsk(), PulseShape(), grid, power_dbm)


class TestCriterion1OracleCertification:
    def test_self_convergence_and_runtime(self):
        x = qpsk_frame(4096, 10.0, seed=1)
        fib = c_band_fiber(20e3)
        t0 = time.perf_counter()
        propagate(x, fib, SsfmConfig(1000))
        per_frame = time.perf_counter() - t0
        self_nsd = convergence_check(x, fib, SsfmConfig(1000))
        assert self_nsd <= 1e-8, f"self-NSD {self_nsd:.3e}"
        assert per_frame <= 120.0, f"frame took {per_frame:.1f}s"
        report(1, f"oracle self-NSD {self_nsd:.2e} (<=1e-8), {per_frame:.1f}s/frame (<=120s)")


class TestCriterion2LimitExactness:
    def test_all_six_reductions(self):
        x = qpsk_frame(512, 10.0, seed=2)
        base = c_band_fiber(20e3)
        worst = 0.0
        lin = replace(base, gamma=0.0)
        ref = dispersion_only(x, lin).waveform
        for model in (rp_gamma, lp_gamma, flp_gamma):
            worst = max(worst, nsd(model(x, lin).waveform, ref) * 100)
        nl = replace(base, beta2=0.0)
        ref = nlpn(x, nl).waveform
        for model in (rp_beta2, lp_beta2, flp_beta2):
            worst = max(worst, nsd(model(x, nl).waveform, ref) * 100)
        both = replace(base, gamma=0.0, beta2=0.0)
        for model in (rp_gamma, lp_beta2):
            worst = max(worst, nsd(model(x, both).waveform, x) * 100)
        assert worst <= 1e-10, f"worst reduction NSD {worst:.3e}%"
        report(2, f"six limit reductions exact to {worst:.2e}% (<=1e-10%)")


class TestCriterion3NsdCrossings:
    def test_crossings(self, cband_nsd_rows):
        rows = cband_nsd_rows
        rp_g = crossing_power(rows, "rp_gamma", 0.1)
        rp_b2 = crossing_power(rows, "rp_beta2", 0.1)
        lp_g = crossing_power(rows, "lp_gamma", 0.1)
        flp_b2 = crossing_power(rows, "flp_beta2", 0.1)
        crossover = crossover_power(rows, "lp_gamma", "flp_beta2")
        assert rp_g is not None and abs(rp_g - 9.8) <= 1.0, f"rp_gamma at {rp_g}"
        assert rp_b2 is not None and abs(rp_b2 - 14.0) <= 1.0, f"rp_beta2 at {rp_b2}"
        assert flp_b2 is not None and lp_g is not None
        gap = flp_b2 - lp_g
        assert abs(gap - 1.5) <= 0.5, f"flp_beta2 - lp_gamma gap {gap:.2f} dB"
        assert crossover is not None and abs(crossover - 7.5) <= 1.5, f"crossover {crossover}"
        report(
            3,
            f"0.1% crossings: rp_gamma {rp_g:.2f} (9.8±1), rp_beta2 {rp_b2:.2f} (14±1), "
            f"gap {gap:.2f} dB (1.5±0.5), crossover {crossover:.2f} dBm (7.5±1.5)",
        )


class TestCriterion4FlpGainRatios:
    def test_c_band_ratio(self, cband_nsd_rows):
        ratio = ratio_at(cband_nsd_rows, "rp_beta2", "flp_beta2", 10.0)
        assert 21.0 <= ratio <= 84.0, f"C-band ratio {ratio:.1f}"
        self._c = ratio
        report(4, f"RP/FLP beta2 NSD ratio at 10 dBm: C-band {ratio:.1f} (42 within 2x)")

    def test_o_band_ratio(self, oband10_rows):
        ratio = ratio_at(oband10_rows, "rp_beta2", "flp_beta2", 10.0)
        assert 45.5 <= ratio <= 182.0, f"O-band ratio {ratio:.1f}"
        report(4, f"RP/FLP beta2 NSD ratio at 10 dBm: O-band {ratio:.1f} (91 within 2x)")


class TestCriterion5Beta2Slopes:
    def test_slopes_and_invariance(self, beta2_sweep_rows):
        rows = beta2_sweep_rows
        s_rp = loglog_slope(rows, "rp_beta2")
        s_flp = loglog_slope(rows, "flp_beta2")
        s_lpg = loglog_slope(rows, "lp_gamma")
        assert 3.5 <= s_rp <= 4.5, f"rp_beta2 slope {s_rp:.2f}"
        assert 3.5 <= s_flp <= 4.5, f"flp_beta2 slope {s_flp:.2f}"
        assert 1.5 <= s_lpg <= 2.5, f"lp_gamma slope {s_lpg:.2f}"
        _, ys = curve(rows, "rp_gamma")
        spread = float(ys.max() / ys.min())
        assert spread <= 2.0, f"rp_gamma NSD spread {spread:.2f}"
        report(
            5,
            f"beta2-sweep slopes: rp_beta2 {s_rp:.2f}, flp_beta2 {s_flp:.2f} (4±0.5), "
            f"lp_gamma {s_lpg:.2f} (2±0.5); rp_gamma spread {spread:.2f} (<=2)",
        )


class TestCriterion6ObandFloors:
    def test_no_tod_plateau(self, oband_floor_rows):
        rows = oband_floor_rows[False]
        xs, ys = curve(rows, "rp_beta2")
        plateau = dict(zip(xs, ys))
        for p in (0.0, 2.0):
            assert 4.6e-11 / 3 <= plateau[p] <= 4.6e-11 * 3, f"{p} dBm floor {plateau[p]:.2e}%"
        conv = [r.value for r in rows if r.metric == "ssfm_self_nsd" and r.power_dbm <= 2.0]
        assert max(conv) <= 1e-13, "oracle not converged enough to resolve the floor"
        report(6, f"O-band no-TOD rp_beta2 plateau {plateau[0.0]:.2e}% / {plateau[2.0]:.2e}% (4.6e-11% x3)")

    def test_tod_common_floor(self, oband_floor_rows):
        rows = oband_floor_rows[True]
        floors = {}
        for model in ("lp_gamma", "rp_beta2", "flp_beta2"):
            xs, ys = curve(rows, model)
            vals = dict(zip(xs, ys))
            floors[model] = vals[0.0]
            assert 1e-10 <= vals[0.0] <= 1e-8, f"{model} floor {vals[0.0]:.2e}%"
            assert 0.5 <= vals[0.0] / vals[3.0] <= 2.0, f"{model} not flat below 3 dBm"
        spread = max(floors.values()) / min(floors.values())
        assert spread <= 1.5, f"models disagree at the TOD floor: {floors}"
        report(6, f"common TOD floor ~{np.mean(list(floors.values())):.2e}% (order 1e-9), spread {spread:.2f}")

    def test_lp_gamma_tod_insensitive_at_high_power(self, oband_floor_rows):
        with_tod = dict(zip(*curve(oband_floor_rows[True], "lp_gamma")))
        without = dict(zip(*curve(oband_floor_rows[False], "lp_gamma")))
        for p in (12.0, 16.0, 20.0):
            ratio = with_tod[p] / without[p]
            assert 1 / 1.5 <= ratio <= 1.5, f"lp_gamma TOD ratio {ratio:.2f} at {p} dBm"
        report(6, "lp_gamma with/without TOD agree within 1.5x above 10 dBm")


def _ber(rows, power, model):
    for r in rows:
        if r.metric == "ber" and r.power_dbm == power and r.model == model:
            return r.value, (r.sigma or 0.0)
    raise AssertionError(f"no ber row for {model} at {power}")


class TestCriterion7DetectorOrdering:
    def test_ordering_and_ratios(self, ber_rows):
        ssfm15, s_ssfm15 = _ber(ber_rows, 15.0, "ssfm_hb")
        flp15, s_flp15 = _ber(ber_rows, 15.0, "flp_beta2_hb")
        lpg15, s_lpg15 = _ber(ber_rows, 15.0, "lp_gamma_hb")
        md16, s_md16 = _ber(ber_rows, 16.0, "min_dist")
        ssfm16, s_ssfm16 = _ber(ber_rows, 16.0, "ssfm_hb")

        rel = lambda v, s: s / v if v > 0 else np.inf
        # FLP-trained detector at least as good as LP-trained (2 sigma)
        tol = 2 * np.hypot(rel(flp15, s_flp15), rel(lpg15, s_lpg15))
        assert flp15 <= lpg15 * (1 + tol), f"flp {flp15:.3e} vs lpg {lpg15:.3e}"
        ratio_models = lpg15 / flp15
        assert ratio_models >= 2.0 * (1 - tol), f"lpg/flp ratio {ratio_models:.2f}"
        tol16 = 2 * np.hypot(rel(md16, s_md16), rel(ssfm16, s_ssfm16))
        ratio_md = md16 / ssfm16
        assert ratio_md >= 5.0 * (1 - tol16), f"min-dist/ssfm ratio {ratio_md:.2f}"
        report(
            7,
            f"15 dBm: ber(lp_gamma_hb)/ber(flp_beta2_hb) = {ratio_models:.2f} (>=2), "
            f"16 dBm: ber(min_dist)/ber(ssfm_hb) = {ratio_md:.1f} (>=5); 2-sigma accounted",
        )


class TestCriterion8FecFormulaVsOracle:
    @pytest.mark.parametrize("p,k,seed", [(1e-2, 223, 31), (1e-3, 239, 32)])
    def test_bsc_oracle_large(self, p, k, seed):
        code = RsCode(255, k)
        res = bsc_rs_oracle(code, 1_000_000, seed=seed, p=p)
        expected = post_fec_ber(p, code)
        gap = abs(res.p_pos - expected)
        assert gap <= 3 * max(res.sigma, 1e-15), (
            f"BSC oracle {res.p_pos:.4e} vs formula {expected:.4e} (3sig {3*res.sigma:.2e})"
        )
        report(
            8,
            f"BSC RS(255,{k}) at p={p:g}: oracle {res.p_pos:.3e} = formula {expected:.3e} "
            f"within 3 sigma ({res.failures} failures / 1e6 codewords)",
        )

    def test_fiber_chain_overlap(self, cache_dir):
        cfg = _ber_cfg((16.0,), 524_288, 1, ("ssfm",))
        strong, official = run_rs_chain_validation(cfg, 16.0, target_p_pos=(1e-3, 1e-5))
        for val, label in ((strong, "p_pos~1e-3"), (official, "p_pos~1e-5")):
            lam = val.predicted_failures
            assert abs(val.measured_failures - lam) <= 3 * np.sqrt(max(lam, 1e-12)) + 1e-9, (
                f"{label}: {val.measured_failures} failures vs predicted {lam:.2f}"
            )
            info_bits = val.codewords * val.code_k * 8
            gap = abs(val.measured_p_pos - val.predicted_p_pos) * info_bits
            sigma_count = val.predicted_sigma * info_bits
            assert gap <= 3 * max(sigma_count, 1e-9), f"{label}: count gap {gap:.1f} vs 3sig {3*sigma_count:.1f}"
        report(
            8,
            "fiber-chain RS validation at p_pos~1e-5 (and a higher-statistics point at ~1e-3) "
            f"within 3 sigma: failures {official.measured_failures} vs {official.predicted_failures:.2f} "
            f"and {strong.measured_failures} vs {strong.predicted_failures:.1f} "
            f"(RS(255,{official.code_k})/RS(255,{strong.code_k}), pre-FEC {official.pre_fec_ber:.3e})",
        )


class TestCriterion9AirRelations:
    def test_bound_dominates(self, air_rows):
        by_key = {}
        for r in air_rows:
            by_key.setdefault((r.model, r.power_dbm), {})[r.metric] = r.value
        for key, vals in by_key.items():
            assert vals["air_th"] >= vals["air_rs"] - 1e-12, f"bound violated at {key}"
        report(9, f"air_th >= air_rs at all {len(by_key)} sweep cells")

    def test_rate_crossings(self, ber_rows):
        p223 = pre_fec_threshold(223)
        p239 = pre_fec_threshold(239)
        p_th = float(brentq(lambda p: air_th(p) - 2 * 223 / 255, 1e-6, 0.4, xtol=1e-12))
        ssfm_cross = crossing_power(ber_rows, "ssfm_hb", p223, metric="ber")
        assert ssfm_cross is not None and abs(ssfm_cross - 16.5) <= 1.0, f"RS223 crossing {ssfm_cross}"
        flp_cross = crossing_power(ber_rows, "flp_beta2_hb", p239, metric="ber")
        lpg_cross = crossing_power(ber_rows, "lp_gamma_hb", p239, metric="ber")
        assert flp_cross is not None and lpg_cross is not None
        gain = flp_cross - lpg_cross
        assert 0.1 <= gain <= 0.7, f"flp-vs-lpg gain at RS239 rate: {gain:.2f} dB"
        th_cross = crossing_power(ber_rows, "ssfm_hb", p_th, metric="ber")
        assert th_cross is not None
        gap = th_cross - ssfm_cross
        assert 1.4 <= gap <= 2.4, f"air_th vs air_rs crossing gap {gap:.2f} dB"
        report(
            9,
            f"ssfm_hb meets RS(255,223) at {ssfm_cross:.2f} dBm (16.5±1); "
            f"flp-vs-lpg gain at RS(255,239): {gain:.2f} dB (0.4±0.3); "
            f"bound-vs-RS gap {gap:.2f} dB (1.9±0.5)",
        )


class TestCriterion10PropertySuites:
    def test_signal_and_oracle_properties(self):
        rng = np.random.default_rng(5)
        x = ComplexEnvelope(rng.standard_normal(2048) + 1j * rng.standard_normal(2048), 1e-12)
        back = inverse_transform(forward_transform(x))
        assert np.linalg.norm(back.samples - x.samples) <= 1e-12 * np.linalg.norm(x.samples)
        assert abs(energy(x) - spectral_energy(forward_transform(x))) <= 1e-12 * energy(x)
        assert nsd(apply_dispersion(apply_dispersion(x, -2e-26, 2e4), 2e-26, 2e4), x) <= 1e-10
        wave = qpsk_frame(512, 17.0, seed=6)
        out = propagate(wave, c_band_fiber(20e3), SsfmConfig(500))
        assert abs(energy(out) - energy(wave)) <= 1e-9 * energy(wave)
        report(10, "round-trip / Parseval / invertibility / energy-conservation bounds hold")

    def test_first_order_consistency(self):
        x = qpsk_frame(256, 8.0, seed=7)
        base = c_band_fiber(20e3)
        ratios = []
        for scale in (1.0, 0.5, 0.25):
            fib = replace(base, gamma=base.gamma * scale)
            gap = np.linalg.norm(
                lp_gamma(x, fib).waveform.samples - rp_gamma(x, fib).waveform.samples
            )
            ratios.append(gap / fib.gamma**2)
        assert max(ratios) / min(ratios) <= 2.0
        report(10, "exponential-vs-regular gap scales as the square of the coefficient")

    def test_tie_break_determinism(self):
        det = train_hb(np.array([0.005 + 0.005j, 0.006 + 0.004j]), np.array([2, 1]))
        assert det.predict(np.array([0.005 + 0.005j]))[0] == 1
        pw = detect_pw(np.array([-1 + 0j, 1 + 0j]), np.array([3, 1]), 10.0, np.array([0j]))
        assert pw[0] == 1
        report(10, "histogram and Parzen tie-breaks deterministic (lowest index)")

    def test_find_max_k_vs_exhaustive_on_grid(self):
        grid = np.logspace(-5, -1, 20)
        for p in grid:
            scan = max(
                (k for k in range(1, 254) if post_fec_ber(p, RsCode(255, k)) < 1e-12),
                default=None,
            )
            assert find_max_k(float(p)) == scan
        report(10, "rate search equals exhaustive scan on a 20-point pre-FEC grid")
