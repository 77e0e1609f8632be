"""Command-line harness: seeded experiment runs, plotting, self-checks.

Exit code 0 on success; on failure a single machine-readable line
``error: <message>`` goes to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, build_config, parse_config_file

__all__ = ["main"]


def _threads_default() -> int:
    env = os.environ.get("PONSIM_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _load_config(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    overrides["threads"] = args.threads
    mapping = parse_config_file(args.config) if args.config else {}
    return build_config(mapping, **overrides)


def _out_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="flat key=value config file")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", type=str, default=None, help="output directory override")
    p.add_argument(
        "--threads",
        type=int,
        default=_threads_default(),
        help="worker threads (default: PONSIM_THREADS or 1)",
    )


def _cmd_nsd_sweep(args) -> int:
    from .experiments import run_nsd_sweep

    cfg = _load_config(args)
    store = run_nsd_sweep(cfg, _out_dir(cfg) / "nsd_sweep.csv")
    print(f"wrote {store.path} ({len(store.rows)} rows)")
    return 0


def _cmd_nsd_vs_b2(args) -> int:
    from .experiments import run_nsd_vs_b2

    cfg = _load_config(args)
    store = run_nsd_vs_b2(cfg, _out_dir(cfg) / "nsd_vs_b2.csv")
    print(f"wrote {store.path} ({len(store.rows)} rows)")
    return 0


def _cmd_decision_regions(args) -> int:
    from .experiments import run_decision_regions

    cfg = _load_config(args)
    paths = run_decision_regions(cfg, _out_dir(cfg))
    print(f"wrote {len(paths)} region maps under {cfg.output_dir}")
    return 0


def _cmd_ber_sweep(args) -> int:
    from .experiments import run_ber_sweep

    cfg = _load_config(args)
    store = run_ber_sweep(cfg, _out_dir(cfg) / "ber_sweep.csv")
    print(f"wrote {store.path} ({len(store.rows)} rows)")
    return 0


def _cmd_air_sweep(args) -> int:
    from .experiments import run_air_sweep, run_ber_sweep, run_rs_chain_validation

    cfg = _load_config(args)
    out = _out_dir(cfg)
    ber_csv = Path(args.ber_csv) if args.ber_csv else out / "ber_sweep.csv"
    if not ber_csv.exists():
        run_ber_sweep(cfg, ber_csv)
    store = run_air_sweep(cfg, ber_csv, out / "air_sweep.csv")
    print(f"wrote {store.path} ({len(store.rows)} rows)")
    if args.validate_power is not None:
        val = run_rs_chain_validation(cfg, args.validate_power)
        print(
            "chain validation: power=%g dBm RS(255,%d) pre=%.3e "
            "measured p_pos=%.3e (failures=%d/%d) predicted=%.3e sigma=%.3e"
            % (
                val.power_dbm,
                val.code_k,
                val.pre_fec_ber,
                val.measured_p_pos,
                val.measured_failures,
                val.codewords,
                val.predicted_p_pos,
                val.predicted_sigma,
            )
        )
    return 0


def _cmd_plot(args) -> int:
    from .plots import emit_plots

    written = emit_plots(args.csv, args.out or "plots")
    print("wrote " + ", ".join(str(p) for p in written))
    return 0


def _cmd_selftest(args) -> int:
    failures = 0
    for name, fn in _selftests():
        try:
            fn()
            print(f"PASS {name}")
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures += 1
            print(f"FAIL {name}: {exc}")
    return 1 if failures else 0


def _selftests():
    import numpy as np

    def transform_round_trip():
        from .signal import ComplexEnvelope, forward_transform, inverse_transform

        rng = np.random.default_rng(0)
        x = ComplexEnvelope(rng.standard_normal(1024) + 1j * rng.standard_normal(1024), 1e-12)
        back = inverse_transform(forward_transform(x))
        err = np.linalg.norm(back.samples - x.samples) / np.linalg.norm(x.samples)
        assert err < 1e-12, f"round trip error {err:.2e}"

    def parseval():
        from .signal import ComplexEnvelope, energy, forward_transform, spectral_energy

        rng = np.random.default_rng(1)
        x = ComplexEnvelope(rng.standard_normal(512) + 1j * rng.standard_normal(512), 2e-12)
        e_t, e_f = energy(x), spectral_energy(forward_transform(x))
        assert abs(e_t - e_f) <= 1e-12 * e_t

    def dispersion_identity():
        from .signal import ComplexEnvelope, apply_dispersion, nsd

        rng = np.random.default_rng(2)
        x = ComplexEnvelope(rng.standard_normal(512) + 1j * rng.standard_normal(512), 1e-12)
        y = apply_dispersion(apply_dispersion(x, -2e-26, 1e4), 2e-26, 1e4)
        assert nsd(y, x) < 1e-20

    def ssfm_linear_limit():
        from .fiber import FiberParams, SsfmConfig, propagate
        from .signal import ComplexEnvelope, apply_dispersion, nsd

        rng = np.random.default_rng(3)
        x = ComplexEnvelope(rng.standard_normal(512) + 1j * rng.standard_normal(512), 1e-11)
        fib = FiberParams(alpha=5e-5, beta2=-2e-26, beta3=0.0, gamma=0.0, length=2e4)
        out = propagate(x, fib, SsfmConfig(64))
        assert nsd(out, apply_dispersion(x, fib.beta2, fib.length)) < 1e-20

    def loss_integrals():
        from scipy.integrate import quad

        from .models import effective_length_integrals

        alpha, z = 4.6e-5, 2e4
        vals = effective_length_integrals(z, alpha)
        g = lambda u: (1.0 - np.exp(-alpha * u)) / alpha
        refs = [g(z)] + [quad(lambda u: g(u) ** k, 0, z, epsrel=1e-12)[0] for k in (1, 2, 3)]
        for v, r in zip(vals, refs):
            assert abs(v - r) <= 1e-10 * abs(r)

    def fec_search():
        from .fec import find_max_k, post_fec_ber, RsCode

        p = 1e-3
        best = find_max_k(p)
        scan = max(
            (k for k in range(1, 254) if post_fec_ber(p, RsCode(255, k)) < 1e-12),
            default=None,
        )
        assert best == scan, f"binary search {best} != scan {scan}"

    return [
        ("transform-round-trip", transform_round_trip),
        ("parseval", parseval),
        ("dispersion-invertibility", dispersion_identity),
        ("ssfm-linear-limit", ssfm_linear_limit),
        ("loss-integrals-vs-quadrature", loss_integrals),
        ("fec-binary-search-vs-scan", fec_search),
    ]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ponsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, extra in [
        ("nsd-sweep", _cmd_nsd_sweep, None),
        ("nsd-vs-b2", _cmd_nsd_vs_b2, None),
        ("decision-regions", _cmd_decision_regions, None),
        ("ber-sweep", _cmd_ber_sweep, None),
        ("air-sweep", _cmd_air_sweep, "air"),
        ("plot", _cmd_plot, "plot"),
        ("selftest", _cmd_selftest, "none"),
    ]:
        p = sub.add_parser(name)
        if extra != "plot" and extra != "none":
            _add_common(p)
        if extra == "air":
            p.add_argument("--ber-csv", type=str, default=None)
            p.add_argument(
                "--validate-power",
                type=float,
                default=None,
                help="also run the interleaved RS chain validation at this power",
            )
        if extra == "plot":
            p.add_argument("--csv", nargs="+", required=True)
            p.add_argument("--out", type=str, default=None)
        p.set_defaults(fn=fn)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - single machine-readable error line
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
