"""Scenario parameters, defaults and the flat ``key=value`` config format."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

BOLTZMANN = 1.380649e-23
NOISE_TEMP_K = 290.0


class ConfigError(ValueError):
    """Raised when a configuration violates one or more constraints.

    ``violations`` holds one message per failed check.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def hata_attenuation_db(carrier_freq, ap_height, user_height):
    """COST231-Hata fixed attenuation (dB) for distances measured in km."""
    f_mhz = carrier_freq / 1e6
    lf = math.log10(f_mhz)
    return (
        46.3
        + 33.9 * lf
        - 13.82 * math.log10(ap_height)
        - (1.1 * lf - 0.7) * user_height
        + (1.56 * lf - 0.8)
    )


def noise_power_w(bandwidth, noise_figure_db):
    return bandwidth * BOLTZMANN * NOISE_TEMP_K * 10 ** (noise_figure_db / 10)


@dataclass(frozen=True)
class SystemConfig:
    """All scenario parameters.

    ``training_len``, ``pathloss_const_db``, ``rho_d`` and ``rho_up`` may be
    left as ``None``; :func:`resolve_config` fills them in.  Lengths are in
    meters, frequencies in Hz, powers in W.

    ``pathloss_const_db`` is the fixed attenuation L of the three-slope model
    referenced to distances in meters, i.e. ``PL = -L - 35 log10(d)`` beyond
    the outer breakpoint.
    """

    num_aps: int = 100
    num_users: int = 40
    coherence_len: int = 200
    training_len: int | None = None
    area_side: float = 1000.0
    carrier_freq: float = 1.9e9
    bandwidth: float = 20e6
    ap_height: float = 15.0
    user_height: float = 1.65
    ap_gain_dbi: float = 0.0
    user_gain_dbi: float = 0.0
    noise_figure_db: float = 9.0
    ap_power_w: float = 0.2
    user_power_w: float = 0.1
    shadow_sigma_db: float = 8.0
    pathloss_breakpoints: tuple[float, float] = (10.0, 50.0)
    pathloss_const_db: float | None = None
    rho_d: float | None = None
    rho_up: float | None = None

    @property
    def noise_power_w(self):
        return noise_power_w(self.bandwidth, self.noise_figure_db)

    def violations(self):
        out = []
        if self.num_users < 1:
            out.append(f"num_users must be >= 1 (got {self.num_users})")
        if self.num_aps <= self.num_users:
            out.append(
                f"num_aps must exceed num_users (got M={self.num_aps}, K={self.num_users})"
            )
        if self.coherence_len < 1:
            out.append(f"coherence_len must be positive (got {self.coherence_len})")
        if self.training_len is not None:
            if self.training_len < 1:
                out.append(f"training_len must be positive (got {self.training_len})")
            if self.training_len >= self.coherence_len:
                out.append(
                    f"training_len must be < coherence_len "
                    f"(got {self.training_len} >= {self.coherence_len})"
                )
        for name in ("area_side", "carrier_freq", "bandwidth", "ap_height",
                     "user_height", "ap_power_w", "user_power_w"):
            value = getattr(self, name)
            if not value > 0:
                out.append(f"{name} must be positive (got {value})")
        if not self.shadow_sigma_db >= 0:
            out.append(f"shadow_sigma_db must be >= 0 (got {self.shadow_sigma_db})")
        d0, d1 = self.pathloss_breakpoints
        if not 0 < d0 < d1:
            out.append(f"pathloss_breakpoints must satisfy 0 < d0 < d1 (got {d0}, {d1})")
        for name in ("rho_d", "rho_up"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                out.append(f"{name} must be positive (got {value})")
        return out

    def validate(self):
        errs = self.violations()
        if errs:
            raise ConfigError(errs)
        return self

    @property
    def is_resolved(self):
        return None not in (self.training_len, self.pathloss_const_db, self.rho_d, self.rho_up)


DEFAULTS = SystemConfig()

_FIELD_TYPES = {
    "num_aps": int,
    "num_users": int,
    "coherence_len": int,
    "training_len": int,
}


def _coerce(name, value):
    if name not in {f.name for f in fields(SystemConfig)}:
        raise ConfigError([f"unknown config key: {name!r}"])
    if isinstance(value, str):
        text = value.strip()
        if name == "pathloss_breakpoints":
            parts = [p for p in text.replace(",", " ").split() if p]
            if len(parts) != 2:
                raise ConfigError([f"pathloss_breakpoints needs two values (got {value!r})"])
            return (float(parts[0]), float(parts[1]))
        if text.lower() in ("", "none"):
            return None
        try:
            return _FIELD_TYPES.get(name, float)(text)
        except ValueError:
            raise ConfigError([f"bad value for {name}: {value!r}"]) from None
    if name == "pathloss_breakpoints":
        d0, d1 = value
        return (float(d0), float(d1))
    if value is None:
        return None
    kind = _FIELD_TYPES.get(name, float)
    if kind is int and (isinstance(value, bool) or int(value) != value):
        raise ConfigError([f"{name} must be an integer (got {value!r})"])
    return kind(value)


def resolve_config(defaults=DEFAULTS, overrides=None):
    """Apply ``overrides`` to ``defaults`` and derive the dependent fields.

    Derived values: ``training_len = ceil(K/2)``, the COST231-Hata path-loss
    constant and the normalized SNRs ``rho = P / (B k_B T0 NF)``.  Anything
    given explicitly is kept.

    Raises:
        ConfigError: unknown keys, malformed values or constraint violations,
            all collected into one error.
    """
    overrides = dict(overrides or {})
    errors = []
    changes = {}
    for key, value in overrides.items():
        try:
            changes[key] = _coerce(key, value)
        except ConfigError as exc:
            errors.extend(exc.violations)
    if errors:
        raise ConfigError(errors)
    cfg = dataclasses.replace(defaults, **changes)
    # validate before deriving so the messages talk about user input
    cfg.validate()

    derived = {}
    if cfg.training_len is None:
        derived["training_len"] = max(1, math.ceil(cfg.num_users / 2))
    if cfg.pathloss_const_db is None:
        # km -> m reference: every branch of the model carries 35 dB/decade in total
        derived["pathloss_const_db"] = (
            hata_attenuation_db(cfg.carrier_freq, cfg.ap_height, cfg.user_height) - 105.0
        )
    gains = 10 ** ((cfg.ap_gain_dbi + cfg.user_gain_dbi) / 10)
    if cfg.rho_d is None:
        derived["rho_d"] = cfg.ap_power_w * gains / cfg.noise_power_w
    if cfg.rho_up is None:
        derived["rho_up"] = cfg.user_power_w * gains / cfg.noise_power_w
    return dataclasses.replace(cfg, **derived).validate()


def config_to_dict(cfg):
    out = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out


def format_config(cfg):
    """Serialize to flat ``key=value`` lines (floats at full precision)."""
    lines = []
    for key, value in config_to_dict(cfg).items():
        if isinstance(value, list):
            text = ",".join(repr(float(v)) for v in value)
        elif value is None:
            text = "none"
        else:
            text = repr(value)
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


def parse_config_text(text):
    """Parse flat ``key=value`` text into an overrides dict.

    Blank lines and ``#`` comments are skipped.  Keys are checked against the
    :class:`SystemConfig` fields.
    """
    overrides = {}
    errors = []
    known = {f.name for f in fields(SystemConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key=value, got {raw!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            errors.append(f"line {lineno}: unknown config key {key!r}")
            continue
        overrides[key] = value
    if errors:
        raise ConfigError(errors)
    return overrides


def load_config_file(path):
    return parse_config_text(Path(path).read_text())
