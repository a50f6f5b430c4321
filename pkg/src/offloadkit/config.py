"""Run configuration: one JSON document holding every tunable, with defaults."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from offloadkit import codefacts, correlate, trace
from offloadkit.energy import RrcModelParams, WifiModelParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str = "3g"
    rrc: RrcModelParams = field(default_factory=RrcModelParams)
    wifi: WifiModelParams = field(default_factory=WifiModelParams)
    bin_width_us: int = correlate.DEFAULT_BIN_WIDTH_US
    max_lag_bins: int = correlate.DEFAULT_MAX_LAG_BINS
    threshold: float = correlate.DEFAULT_THRESHOLD
    idle_gap_us: int = trace.DEFAULT_IDLE_GAP_US
    network_prefixes: tuple[str, ...] = correlate.DEFAULT_NETWORK_PREFIXES
    hardware_catalog: tuple[str, ...] = codefacts.DEFAULT_HARDWARE_CATALOG
    filesystem_tags: tuple[str, ...] = codefacts.DEFAULT_FILESYSTEM_TAGS
    always_serializable: tuple[str, ...] = codefacts.DEFAULT_ALWAYS_SERIALIZABLE
    min_bytes_filter: int = 1
    collapse_prefixes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.model not in ("3g", "wifi"):
            raise ConfigError(f"model must be '3g' or 'wifi', got {self.model!r}")
        if self.bin_width_us <= 0:
            raise ConfigError("bin_width_us must be positive")
        if self.max_lag_bins < 0:
            raise ConfigError("max_lag_bins must be >= 0")
        if not 0 < self.threshold <= 1:
            raise ConfigError("threshold must be in (0, 1]")
        if self.idle_gap_us <= 0:
            raise ConfigError("idle_gap_us must be positive")
        if not self.network_prefixes:
            raise ConfigError("network_prefixes must not be empty")
        if self.min_bytes_filter < 0:
            raise ConfigError("min_bytes_filter must be >= 0")

    @property
    def energy_model(self):
        return self.rrc if self.model == "3g" else self.wifi

    @property
    def call_filter(self) -> correlate.NetworkCallFilter:
        return correlate.NetworkCallFilter(self.network_prefixes)

    @property
    def constraint_config(self) -> codefacts.ConstraintConfig:
        return codefacts.ConstraintConfig(
            self.always_serializable, self.hardware_catalog, self.filesystem_tags
        )

    def to_mapping(self) -> dict:
        return {
            "model": self.model,
            "rrc": dataclasses.asdict(self.rrc),
            "wifi": dataclasses.asdict(self.wifi),
            "correlation": {
                "bin_width_us": self.bin_width_us,
                "max_lag_bins": self.max_lag_bins,
                "threshold": self.threshold,
                "network_prefixes": list(self.network_prefixes),
            },
            "idle_gap_us": self.idle_gap_us,
            "min_bytes_filter": self.min_bytes_filter,
            "collapse_prefixes": list(self.collapse_prefixes),
            "constraints": {
                "hardware_catalog": list(self.hardware_catalog),
                "filesystem_tags": list(self.filesystem_tags),
                "always_serializable": list(self.always_serializable),
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_mapping(), indent=2) + "\n"


_NUMERIC = {
    "p_dch_mw": float, "p_fach_mw": float, "p_idle_mw": float, "p_active_mw": float,
    "per_byte_tx_uj": float, "per_byte_rx_uj": float, "per_packet_uj": float, "per_byte_uj": float,
    "t_dch_us": int, "t_fach_us": int, "tail_us": int,
    "bin_width_us": int, "max_lag_bins": int, "idle_gap_us": int, "min_bytes_filter": int,
    "threshold": float,
}


def _check_keys(section: dict, allowed, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _number(key: str, value):
    kind = _NUMERIC[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key} must be an integer")
        return int(value)
    return float(value)


def _strings(key: str, value) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{key} must be a list of strings")
    return tuple(value)


def from_mapping(data: dict) -> RunConfig:
    """Build a config from a (possibly partial) mapping; missing keys take defaults."""
    base = RunConfig()
    _check_keys(data, ("model", "rrc", "wifi", "correlation", "idle_gap_us",
                       "min_bytes_filter", "collapse_prefixes", "constraints"), "config")
    kw = {}
    try:
        for name, cls in (("rrc", RrcModelParams), ("wifi", WifiModelParams)):
            section = data.get(name, {})
            allowed = [f.name for f in dataclasses.fields(cls)]
            _check_keys(section, allowed, name)
            kw[name] = dataclasses.replace(
                getattr(base, name), **{k: _number(k, v) for k, v in section.items()}
            )
        corr = data.get("correlation", {})
        _check_keys(corr, ("bin_width_us", "max_lag_bins", "threshold", "network_prefixes"), "correlation")
        for k, v in corr.items():
            kw[k] = _strings(k, v) if k == "network_prefixes" else _number(k, v)
        cons = data.get("constraints", {})
        _check_keys(cons, ("hardware_catalog", "filesystem_tags", "always_serializable"), "constraints")
        for k, v in cons.items():
            kw[k] = _strings(k, v)
        for k in ("idle_gap_us", "min_bytes_filter"):
            if k in data:
                kw[k] = _number(k, data[k])
        if "collapse_prefixes" in data:
            kw["collapse_prefixes"] = _strings("collapse_prefixes", data["collapse_prefixes"])
        if "model" in data:
            kw["model"] = data["model"]
        return dataclasses.replace(base, **kw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def loads(text: str) -> RunConfig:
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return from_mapping(data)


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
