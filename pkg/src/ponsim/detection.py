"""Symbol detectors: histogram-MAP, Parzen window, minimum distance.

The histogram detector approximates the memoryless MAP rule on a square
region of the complex plane split into fixed-size bins: training counts per
(constellation index, bin) pick the most frequent index per bin; bins never
hit during training copy the decision of the nearest nonempty bin.  All ties
break deterministically (lowest constellation index; nearest-bin ties by
row-major bin order) so BER figures are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .transceiver import Constellation, gray_qpsk

__all__ = [
    "HistogramDetector",
    "ParzenWindowDetector",
    "DecisionRegionMap",
    "train_hb",
    "detect_hb",
    "train_pw",
    "detect_pw",
    "optimize_pw_radius",
    "min_distance_detect",
    "ber",
]


@dataclass(frozen=True)
class DecisionRegionMap:
    """bins x bins grid of constellation indices, row-major over (re, im)."""

    indices: np.ndarray
    extent: float
    bin_size: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.indices, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("region map must be square")
        arr.flags.writeable = False
        object.__setattr__(self, "indices", arr)


class HistogramDetector:
    """MAP-by-histogram detector on [-extent, extent]^2 with square bins.

    Defaults follow the standard setup: extent 2, 400x400 bins of side 0.01.
    Out-of-region samples are clamped to the nearest boundary bin both when
    counting and when detecting.
    """

    def __init__(self, n_classes: int = 4, extent: float = 2.0, bins: int = 400):
        if n_classes < 2 or bins < 2 or extent <= 0:
            raise ValueError("invalid histogram detector geometry")
        self.n_classes = n_classes
        self.extent = float(extent)
        self.bins = int(bins)
        self.bin_size = 2.0 * extent / bins
        self.counts: np.ndarray | None = None
        self.decisions: np.ndarray | None = None

    # -- training ------------------------------------------------------------

    def _bin_indices(self, samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        re = np.clip(
            np.floor((samples.real + self.extent) / self.bin_size).astype(np.int64),
            0,
            self.bins - 1,
        )
        im = np.clip(
            np.floor((samples.imag + self.extent) / self.bin_size).astype(np.int64),
            0,
            self.bins - 1,
        )
        return re, im

    def accumulate(self, samples: np.ndarray, labels: np.ndarray) -> "HistogramDetector":
        """Add training counts; call finalize() before predicting."""
        samples = np.asarray(samples, dtype=np.complex128)
        labels = np.asarray(labels, dtype=np.int64)
        if samples.size != labels.size:
            raise ValueError("samples and labels must align")
        if samples.size == 0:
            return self
        if self.counts is None:
            self.counts = np.zeros((self.n_classes, self.bins, self.bins), dtype=np.int64)
        re, im = self._bin_indices(samples)
        flat = labels * (self.bins * self.bins) + re * self.bins + im
        self.counts += np.bincount(
            flat, minlength=self.n_classes * self.bins * self.bins
        ).reshape(self.n_classes, self.bins, self.bins)
        self.decisions = None
        return self

    def finalize(self) -> "HistogramDetector":
        """Per-bin argmax plus nearest-nonempty fill for untouched bins."""
        if self.counts is None or int(self.counts.sum()) == 0:
            raise ValueError("histogram detector has no training samples")
        counts = self.counts
        decisions = np.argmax(counts, axis=0).astype(np.int64)  # first max = lowest index
        occupied = counts.sum(axis=0) > 0
        if not occupied.all():
            occ_re, occ_im = np.nonzero(occupied)  # row-major order
            centers = np.column_stack((occ_re, occ_im)).astype(np.float64)
            tree = cKDTree(centers)
            emp_re, emp_im = np.nonzero(~occupied)
            query = np.column_stack((emp_re, emp_im)).astype(np.float64)
            dist, nearest = tree.query(query, k=1)
            # ties at exactly equal distance resolve to the lowest row-major
            # occupied bin; cKDTree does not guarantee that, so re-query balls
            balls = tree.query_ball_point(query, dist * (1.0 + 1e-12) + 1e-12)
            nearest = np.array([min(b) for b in balls], dtype=np.int64)
            fill = decisions[occ_re[nearest], occ_im[nearest]]
            decisions[emp_re, emp_im] = fill
        self.decisions = decisions
        return self

    def fit(self, samples: np.ndarray, labels: np.ndarray) -> "HistogramDetector":
        return self.accumulate(samples, labels).finalize()

    # -- detection -------------------------------------------------------------

    def predict(self, samples: np.ndarray) -> np.ndarray:
        if self.decisions is None:
            raise ValueError("detector is not trained; call fit()/finalize()")
        samples = np.asarray(samples, dtype=np.complex128)
        re, im = self._bin_indices(samples)
        return self.decisions[re, im]

    def region_map(self) -> DecisionRegionMap:
        if self.decisions is None:
            raise ValueError("detector is not trained")
        return DecisionRegionMap(self.decisions.copy(), self.extent, self.bin_size)

    def bin_centers(self) -> tuple[np.ndarray, np.ndarray]:
        c = -self.extent + self.bin_size * (np.arange(self.bins) + 0.5)
        return c, c


def train_hb(
    samples: np.ndarray,
    labels: np.ndarray,
    n_classes: int = 4,
    extent: float = 2.0,
    bins: int = 400,
) -> HistogramDetector:
    return HistogramDetector(n_classes, extent, bins).fit(samples, labels)


def detect_hb(det: HistogramDetector, samples: np.ndarray) -> np.ndarray:
    return det.predict(samples)


class ParzenWindowDetector:
    """Inverse-distance-weighted vote over training samples within radius R.

    score(s) = sum over training samples of class s within R of 1/distance;
    highest score wins (ties -> lowest index).  An exact coincidence decides
    immediately for that training label (lowest label among coincidences);
    if no training sample lies within R the nearest single sample decides.
    """

    def __init__(self, radius: float, n_classes: int = 4):
        if not radius > 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.n_classes = n_classes
        self._tree: cKDTree | None = None
        self._labels: np.ndarray | None = None

    def fit(self, samples: np.ndarray, labels: np.ndarray) -> "ParzenWindowDetector":
        samples = np.asarray(samples, dtype=np.complex128)
        labels = np.asarray(labels, dtype=np.int64)
        if samples.size == 0:
            raise ValueError("empty training set")
        if samples.size != labels.size:
            raise ValueError("samples and labels must align")
        self._points = np.column_stack((samples.real, samples.imag))
        self._tree = cKDTree(self._points)
        self._labels = labels
        return self

    def predict(self, samples: np.ndarray) -> np.ndarray:
        if self._tree is None:
            raise ValueError("detector is not trained; call fit()")
        samples = np.asarray(samples, dtype=np.complex128)
        pts = np.column_stack((samples.real, samples.imag))
        neighborhoods = self._tree.query_ball_point(pts, self.radius)
        out = np.empty(samples.size, dtype=np.int64)
        labels = self._labels
        for i, idx in enumerate(neighborhoods):
            if not idx:
                _, j = self._tree.query(pts[i], k=1)
                out[i] = labels[j]
                continue
            idx = np.asarray(idx, dtype=np.int64)
            d = np.hypot(
                self._points[idx, 0] - pts[i, 0], self._points[idx, 1] - pts[i, 1]
            )
            coincident = d == 0.0
            if coincident.any():
                out[i] = labels[idx[coincident]].min()
                continue
            scores = np.bincount(labels[idx], weights=1.0 / d, minlength=self.n_classes)
            out[i] = int(np.argmax(scores))  # first max = lowest index
        return out


def train_pw(
    training: np.ndarray, labels: np.ndarray, radius: float, n_classes: int = 4
) -> ParzenWindowDetector:
    return ParzenWindowDetector(radius, n_classes).fit(training, labels)


def detect_pw(
    training: np.ndarray,
    labels: np.ndarray,
    radius: float,
    test_samples: np.ndarray,
    n_classes: int = 4,
) -> np.ndarray:
    return train_pw(training, labels, radius, n_classes).predict(test_samples)


def optimize_pw_radius(
    training: np.ndarray,
    train_labels: np.ndarray,
    validation: np.ndarray,
    val_labels: np.ndarray,
    constellation: Constellation | None = None,
    n_radii: int = 50,
    radius_range: tuple[float, float] = (0.01, 1.0),
) -> float:
    """Grid search over a log-spaced radius grid; BER-minimizing R wins
    (ties -> smallest R)."""
    constellation = constellation or gray_qpsk()
    radii = np.logspace(np.log10(radius_range[0]), np.log10(radius_range[1]), n_radii)
    val_bits = constellation.bits_from_indices(np.asarray(val_labels, dtype=np.int64))
    best_r, best_ber = None, None
    for r in radii:
        pred = detect_pw(training, train_labels, r, validation, constellation.order)
        b = ber(val_bits, constellation.bits_from_indices(pred))
        if best_ber is None or b < best_ber:
            best_r, best_ber = float(r), b
    return best_r


def min_distance_detect(samples: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Nearest constellation point; ties -> lowest index."""
    samples = np.asarray(samples, dtype=np.complex128)
    d = np.abs(samples[:, None] - constellation.points[None, :])
    return np.argmin(d, axis=1).astype(np.int64)


def ber(tx_bits: np.ndarray, rx_bits: np.ndarray) -> float:
    """Hamming distance over length."""
    tx = np.asarray(tx_bits, dtype=np.uint8)
    rx = np.asarray(rx_bits, dtype=np.uint8)
    if tx.size != rx.size:
        raise ValueError("bit vectors must have equal length")
    if tx.size == 0:
        raise ValueError("empty bit vectors")
    return float(np.mean(tx != rx))
