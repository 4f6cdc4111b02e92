"""Screening of non-centrosymmetric crystals as type-I SPDC photon-pair sources."""

__version__ = "0.1.0"

from .crystal import CrystalRecord, PumpConfig, load_crystal, parse_crystal  # noqa: E402
from .pipeline import RunConfig, screen_batch, screen_one, wavelength_sweep  # noqa: E402

__all__ = [
    "CrystalRecord",
    "PumpConfig",
    "RunConfig",
    "load_crystal",
    "parse_crystal",
    "screen_batch",
    "screen_one",
    "wavelength_sweep",
    "__version__",
]
