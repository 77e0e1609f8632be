"""Experiment configuration: flat key=value files, typed config, seed derivation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .models import ModelKind

__all__ = ["ExperimentConfig", "parse_config_file", "build_config", "derive_seed"]


def derive_seed(master: int, *parts) -> int:
    """Counter-free per-cell seed: hash of the master seed and role labels."""
    text = repr((int(master),) + tuple(str(p) for p in parts))
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


_DEFAULT_MODELS = (
    ModelKind.RP_GAMMA,
    ModelKind.LP_GAMMA,
    ModelKind.FLP_GAMMA,
    ModelKind.RP_BETA2,
    ModelKind.LP_BETA2,
    ModelKind.FLP_BETA2,
)


@dataclass(frozen=True)
class ExperimentConfig:
    band: str = "C"
    power_sweep_dbm: tuple[float, ...] = (10.0,)
    models: tuple[ModelKind, ...] = _DEFAULT_MODELS
    symbols: int = 4096
    samples_per_symbol: int = 16
    symbol_rate: float = 10e9
    guard_symbols: int = 32
    seed: int = 1
    ssfm_steps: int = 1000
    output_dir: str = "results"
    tod_enabled: bool = True
    repeats: int = 1
    quad_steps: int = 100
    rolloff: float = 0.1
    # detection / BER experiments
    train_symbols: int = 1_000_000
    test_symbols: int = 1_048_576
    detector_engines: tuple[str, ...] = ("ssfm", "flp_beta2", "lp_gamma")
    pw_training: tuple[int, ...] = ()
    pw_block_symbols: int = 65536
    pw_repeats: int = 8
    # nsd-vs-b2 mode
    beta2_sweep_ps2_km: tuple[float, ...] = ()
    # optional physics override (None keeps the band's table value)
    gamma_override_per_w_km: float | None = None
    threads: int = 1

    def __post_init__(self) -> None:
        if not self.power_sweep_dbm:
            raise ValueError("power sweep must be nonempty")
        if self.symbols < 256:
            raise ValueError("symbols must be >= 256")
        if self.band not in ("C", "O"):
            raise ValueError("band must be C or O")
        if self.repeats < 1 or self.threads < 1:
            raise ValueError("repeats and threads must be >= 1")

    def content_hash(self) -> str:
        """Short content hash identifying this configuration."""
        items = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("output_dir", "threads"):
                continue  # execution details, not physics
            if f.name == "models":
                v = tuple(m.value for m in v)
            items.append((f.name, v))
        digest = hashlib.sha256(repr(sorted(items)).encode()).hexdigest()
        return digest[:12]


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat `key = value` lines; '#' starts a comment; blank lines ignored."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def _parse_tuple(value: str, cast):
    items = [v.strip() for v in value.split(",") if v.strip()]
    return tuple(cast(v) for v in items)


def build_config(mapping: dict[str, str], **overrides) -> ExperimentConfig:
    """Typed config from a string mapping; unknown keys are errors."""
    known = {f.name: f for f in fields(ExperimentConfig)}
    kwargs: dict = {}
    for key, value in mapping.items():
        if key == "experiment":
            continue  # consumed by the CLI dispatcher
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        if key in ("power_sweep_dbm", "beta2_sweep_ps2_km"):
            kwargs[key] = _parse_tuple(value, float)
        elif key == "models":
            kwargs[key] = _parse_tuple(value, ModelKind.from_label)
        elif key in ("detector_engines",):
            kwargs[key] = _parse_tuple(value, str)
        elif key in ("pw_training",):
            kwargs[key] = _parse_tuple(value, int)
        elif key == "tod_enabled":
            kwargs[key] = value.lower() in ("1", "true", "yes", "on")
        elif key in ("band", "output_dir"):
            kwargs[key] = value
        elif key in ("symbol_rate", "rolloff", "gamma_override_per_w_km"):
            kwargs[key] = float(value)
        else:
            kwargs[key] = int(value)
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)
