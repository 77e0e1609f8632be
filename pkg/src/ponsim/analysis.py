"""Post-processing of result rows: averaging, threshold crossings, slope fits."""

from __future__ import annotations

import numpy as np

from .experiments import ResultRow

__all__ = [
    "curve",
    "crossing_power",
    "crossover_power",
    "loglog_slope",
    "ratio_at",
]


def curve(
    rows: list[ResultRow], model: str, metric: str = "nsd_percent"
) -> tuple[np.ndarray, np.ndarray]:
    """(x, mean value) sorted by the sweep variable, averaged over seeds."""
    acc: dict[float, list[float]] = {}
    for r in rows:
        if r.model == model and r.metric == metric:
            acc.setdefault(r.power_dbm, []).append(r.value)
    if not acc:
        raise ValueError(f"no rows for model={model!r} metric={metric!r}")
    xs = np.array(sorted(acc))
    ys = np.array([np.mean(acc[x]) for x in xs])
    return xs, ys


def _interp_crossing(xs: np.ndarray, logy: np.ndarray, level: float) -> float | None:
    target = np.log10(level)
    for i in range(xs.size - 1):
        y0, y1 = logy[i], logy[i + 1]
        if (y0 - target) * (y1 - target) <= 0 and y1 != y0:
            return float(xs[i] + (xs[i + 1] - xs[i]) * (target - y0) / (y1 - y0))
    return None


def crossing_power(
    rows: list[ResultRow], model: str, level: float, metric: str = "nsd_percent"
) -> float | None:
    """Sweep value where the (rising) curve crosses `level`, log-interpolated."""
    xs, ys = curve(rows, model, metric)
    mask = ys > 0
    return _interp_crossing(xs[mask], np.log10(ys[mask]), level)


def crossover_power(
    rows: list[ResultRow], model_a: str, model_b: str, metric: str = "nsd_percent"
) -> float | None:
    """Sweep value where curve(model_a) and curve(model_b) intersect."""
    xa, ya = curve(rows, model_a, metric)
    xb, yb = curve(rows, model_b, metric)
    common = np.intersect1d(xa, xb)
    if common.size < 2:
        return None
    la = np.log10([ya[list(xa).index(x)] for x in common])
    lb = np.log10([yb[list(xb).index(x)] for x in common])
    diff = la - lb
    for i in range(common.size - 1):
        if diff[i] * diff[i + 1] <= 0 and diff[i] != diff[i + 1]:
            frac = (0 - diff[i]) / (diff[i + 1] - diff[i])
            return float(common[i] + (common[i + 1] - common[i]) * frac)
    return None


def loglog_slope(rows: list[ResultRow], model: str, metric: str = "nsd_percent") -> float:
    """Least-squares slope of log10(metric) vs log10(sweep variable)."""
    xs, ys = curve(rows, model, metric)
    if xs.size < 2:
        raise ValueError("need at least two sweep points for a slope")
    return float(np.polyfit(np.log10(xs), np.log10(ys), 1)[0])


def ratio_at(
    rows: list[ResultRow], model_num: str, model_den: str, x: float, metric: str = "nsd_percent"
) -> float:
    xs, ys = curve(rows, model_num, metric)
    xd, yd = curve(rows, model_den, metric)
    yi = np.interp(x, xs, ys)
    qi = np.interp(x, xd, yd)
    return float(yi / qi)
