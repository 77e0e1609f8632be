"""ponsim: perturbation channel models and detection for short nonlinear fiber links.

Subpackages follow the processing chain: `signal` (grids and spectral
operators), `fiber` (split-step reference solver), `models` (closed-form
perturbation models), `transceiver` (QPSK/RRC chain and the splitter link),
`detection` (histogram-MAP, Parzen window, minimum distance), `fec`
(Reed-Solomon post-FEC BER and achievable rates), and `experiments`/`cli`
(seeded sweep harness, CSV/plot emission).
"""

from .signal import (
    ComplexEnvelope,
    SpectralEnvelope,
    Grid,
    forward_transform,
    inverse_transform,
    spectral_derivative,
    apply_dispersion,
    energy,
    nsd,
)
from .fiber import FiberParams, SsfmConfig, propagate, convergence_check
from .models import (
    ModelKind,
    ModelConfig,
    ModelOutput,
    StabilizationConfig,
    propagate_model,
)
from .transceiver import (
    Constellation,
    PulseShape,
    LinkConfig,
    SymbolFrame,
    gray_qpsk,
    pon_link,
    modulate,
    matched_filter_and_sample,
    propagate_link,
)
from .detection import HistogramDetector, ParzenWindowDetector, min_distance_detect, ber
from .fec import RsCode, AirResult, post_fec_ber, find_max_k, air_rs, air_th

__version__ = "0.1.0"
