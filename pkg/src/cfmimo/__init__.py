"""Downlink rates of cell-free massive MIMO under normalized and conventional
conjugate beamforming, in closed form and by Monte Carlo."""

__version__ = "0.1.0"

from .config import ConfigError, SystemConfig, resolve_config  # noqa: E402
from .precoding import Scheme  # noqa: E402

__all__ = ["ConfigError", "Scheme", "SystemConfig", "resolve_config", "__version__"]
