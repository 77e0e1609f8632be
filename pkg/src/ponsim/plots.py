"""Static plot emission from result CSVs (headless, deterministic output)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .analysis import curve
from .experiments import read_region_csv, read_rows

__all__ = ["emit_plots"]

_STYLE = {
    "disp_only": ("tab:gray", "o"),
    "nlpn": ("tab:brown", "v"),
    "rp_gamma": ("tab:blue", "^"),
    "lp_gamma": ("tab:cyan", "s"),
    "flp_gamma": ("tab:purple", "D"),
    "rp_beta2": ("tab:red", "^"),
    "lp_beta2": ("tab:orange", "s"),
    "flp_beta2": ("tab:pink", "D"),
}


def _style(name: str):
    return _STYLE.get(name, ("black", "x"))


def _plot_sweep(rows, metric, ylabel, logy, out_path, xlabel):
    models = sorted({r.model for r in rows if r.metric == metric})
    if not models:
        raise ValueError(f"no {metric} rows to plot")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for m in models:
        xs, ys = curve(rows, m, metric)
        color, marker = _style(m)
        ax.plot(xs, ys, label=m, color=color, marker=marker, ms=4)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150, metadata={"Software": "ponsim"})
    plt.close(fig)


def _plot_regions(path: Path, out_path: Path):
    grid, header = read_region_csv(path)
    extent = float(header.get("extent", 2.0))
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    ax.imshow(
        grid.T,
        origin="lower",
        extent=(-extent, extent, -extent, extent),
        cmap="viridis",
        interpolation="nearest",
    )
    hist_path = Path(str(path).replace(".csv", "_hist_class3.csv"))
    if hist_path.exists():
        hist, _ = read_region_csv(hist_path)
        hist = hist.astype(float).T
        if hist.max() > 0:
            centers = np.linspace(-extent, extent, grid.shape[0], endpoint=False) + extent / grid.shape[0]
            levels = hist.max() * np.array([0.01, 0.1, 0.5])
            ax.contour(centers, centers, hist, levels=levels, colors="white", linewidths=0.8)
    ax.set_xlabel("in-phase")
    ax.set_ylabel("quadrature")
    title = f"{header.get('model', '?')} @ {header.get('power_dbm', '?')} dBm"
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150, metadata={"Software": "ponsim"})
    plt.close(fig)


def emit_plots(csv_paths: list[str | Path], out_dir: str | Path) -> list[Path]:
    """One image per input CSV, named after the experiment it holds."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for path in csv_paths:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(path)
        if path.name.startswith("regions_"):
            if path.name.endswith("_hist_class3.csv"):
                continue
            out = out_dir / (path.stem + ".png")
            _plot_regions(path, out)
            written.append(out)
            continue
        rows = read_rows(path)
        if not rows:
            raise ValueError(f"{path} holds no result rows")
        experiments = {r.experiment for r in rows}
        if "nsd-sweep" in experiments:
            out = out_dir / (path.stem + "_nsd.png")
            _plot_sweep(rows, "nsd_percent", "NSD [%]", True, out, "launch power [dBm]")
            written.append(out)
        if "nsd-vs-b2" in experiments:
            out = out_dir / (path.stem + "_nsd_vs_b2.png")
            fig, ax = plt.subplots(figsize=(6.0, 4.2))
            for m in sorted({r.model for r in rows if r.metric == "nsd_percent"}):
                xs, ys = curve(rows, m, "nsd_percent")
                color, marker = _style(m)
                ax.loglog(xs, ys, label=m, color=color, marker=marker, ms=4)
            ax.set_xlabel(r"$|\beta_2|$ [ps$^2$/km]")
            ax.set_ylabel("NSD [%]")
            ax.grid(True, which="both", alpha=0.3)
            ax.legend(fontsize=8)
            fig.tight_layout()
            fig.savefig(out, dpi=150, metadata={"Software": "ponsim"})
            plt.close(fig)
            written.append(out)
        if "ber-sweep" in experiments:
            out = out_dir / (path.stem + "_ber.png")
            _plot_sweep(rows, "ber", "BER", True, out, "launch power [dBm]")
            written.append(out)
        if "air-sweep" in experiments:
            out = out_dir / (path.stem + "_air.png")
            fig, ax = plt.subplots(figsize=(6.0, 4.2))
            for m in sorted({r.model for r in rows if r.metric == "air_rs"}):
                xs, ys = curve(rows, m, "air_rs")
                color, _ = _style(m.replace("_hb", ""))
                ax.plot(xs, ys, "--", color=color, label=f"{m} RS")
                xs, ys = curve(rows, m, "air_th")
                ax.plot(xs, ys, "-", color=color, label=f"{m} bound")
            ax.set_xlabel("launch power [dBm]")
            ax.set_ylabel("AIR [bits/symbol]")
            ax.grid(True, alpha=0.3)
            ax.legend(fontsize=7)
            fig.tight_layout()
            fig.savefig(out, dpi=150, metadata={"Software": "ponsim"})
            plt.close(fig)
            written.append(out)
    if not written:
        raise ValueError("no plottable content found in the given CSVs")
    return written
