"""Service configuration: one JSON document wires routes, devices, rules,
intervals, and detector settings together.

Validation is exhaustive — a bad config reports every violation at once, not
just the first, so an operator fixes the file in one pass.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields as dataclass_fields, replace
from pathlib import Path
from typing import Any, Optional

from ..analysis import (
    DEFAULT_LOSS_TOLERANCE_DB,
    DEFAULT_MIN_LOSS_DB,
    DEFAULT_MIN_PEAK_DB,
    OTDR_DETECTOR,
)
from ..detectors import DetectorConfig
from ..fiber import FiberRoute, OtdrParams, SimulationError
from ..maintenance import DeviceProfile, MaintenanceError
from ..serde import FORMAT_CONFIG, FORMAT_ROUTE, FormatError, read_document
from ..siem import SecurityRule, SiemError

ENV_CONFIG_PATH = "DEEPALM_CONFIG"

TELEMETRY_DETECTOR = DetectorConfig(
    ewma_lambda=0.3, z_threshold=4.0, cusum_drift_k=0.1, cusum_threshold_h=0.5, min_separation=1
)
LOG_DETECTOR = DetectorConfig(
    ewma_lambda=0.3, z_threshold=4.0, cusum_drift_k=0.5, cusum_threshold_h=5.0, min_separation=1
)


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class MonitorConfig:
    routes: tuple[FiberRoute, ...] = ()
    devices: tuple[DeviceProfile, ...] = ()
    rules: tuple[SecurityRule, ...] = ()
    scan_interval_s: float = 5.0
    telemetry_interval_s: float = 10.0
    log_poll_interval_s: float = 10.0
    dedup_window_s: float = 300.0
    persistence_path: str = "alerts.journal"
    otdr_params: OtdrParams = field(default_factory=OtdrParams)
    otdr_detector: DetectorConfig = OTDR_DETECTOR
    telemetry_detector: DetectorConfig = TELEMETRY_DETECTOR
    log_detector: DetectorConfig = LOG_DETECTOR
    min_loss_db: float = DEFAULT_MIN_LOSS_DB
    min_peak_db: float = DEFAULT_MIN_PEAK_DB
    loss_tolerance_db: float = DEFAULT_LOSS_TOLERANCE_DB
    maintenance_horizon_hours: float = 100.0
    rul_window: int = 24
    log_bucket_s: float = 3600.0
    log_rate_per_min: float = 0.5
    log_source: str = "fsp3000-1"

    def validate(self) -> list[str]:
        violations = []
        for name in (
            "scan_interval_s",
            "telemetry_interval_s",
            "log_poll_interval_s",
            "dedup_window_s",
            "maintenance_horizon_hours",
            "log_bucket_s",
        ):
            if getattr(self, name) <= 0:
                violations.append(f"{name} must be > 0")
        if self.rul_window < 2:
            violations.append("rul_window must be >= 2")
        if self.log_rate_per_min < 0:
            violations.append("log_rate_per_min must be >= 0")
        if self.min_loss_db <= 0:
            violations.append("min_loss_db must be > 0")
        if self.min_peak_db <= 0:
            violations.append("min_peak_db must be > 0")
        if self.loss_tolerance_db <= 0:
            violations.append("loss_tolerance_db must be > 0")
        if not self.persistence_path:
            violations.append("persistence_path must be non-empty")
        seen_routes = set()
        for route in self.routes:
            if route.route_id in seen_routes:
                violations.append(f"duplicate route_id {route.route_id!r}")
            seen_routes.add(route.route_id)
        seen_devices = set()
        for dev in self.devices:
            if dev.device_id in seen_devices:
                violations.append(f"duplicate device_id {dev.device_id!r}")
            seen_devices.add(dev.device_id)
        return violations


def _detector_from(doc: dict[str, Any], base: DetectorConfig) -> DetectorConfig:
    known = {f.name for f in dataclass_fields(DetectorConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown detector fields {sorted(unknown)}")
    return replace(base, **{k: v for k, v in doc.items()})


def _otdr_params_from(doc: dict[str, Any]) -> OtdrParams:
    known = {f.name for f in dataclass_fields(OtdrParams)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown otdr_params fields {sorted(unknown)}")
    return OtdrParams(**doc)


def load_monitor_config(path: str | Path) -> MonitorConfig:
    """Parse and validate a deepalm-config/1 file; raises :class:`ConfigError`
    listing every violation. Relative paths inside the file resolve against
    the file's own directory."""
    path = Path(path)
    violations: list[str] = []
    try:
        doc = read_document(path, FORMAT_CONFIG)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except (FormatError, json.JSONDecodeError) as exc:
        raise ConfigError([f"config file unreadable: {exc}"]) from None
    base = path.resolve().parent

    routes: list[FiberRoute] = []
    for i, entry in enumerate(doc.get("routes", [])):
        try:
            if isinstance(entry, str):
                entry = read_document(base / entry, FORMAT_ROUTE)
            routes.append(FiberRoute.from_json(entry))
        except (SimulationError, FormatError, FileNotFoundError, KeyError, ValueError) as exc:
            violations.append(f"routes[{i}]: {exc}")

    devices: list[DeviceProfile] = []
    for i, entry in enumerate(doc.get("devices", [])):
        try:
            devices.append(DeviceProfile.from_json(entry))
        except (MaintenanceError, KeyError, ValueError) as exc:
            violations.append(f"devices[{i}]: {exc}")

    rules: list[SecurityRule] = []
    for i, entry in enumerate(doc.get("rules", [])):
        try:
            rules.append(SecurityRule.from_json(entry))
        except (SiemError, KeyError, ValueError) as exc:
            violations.append(f"rules[{i}]: {exc}")

    kwargs: dict[str, Any] = {
        "routes": tuple(routes),
        "devices": tuple(devices),
        "rules": tuple(rules),
    }
    scalars = (
        ("scan_interval_s", float),
        ("telemetry_interval_s", float),
        ("log_poll_interval_s", float),
        ("dedup_window_s", float),
        ("persistence_path", str),
        ("min_loss_db", float),
        ("min_peak_db", float),
        ("loss_tolerance_db", float),
        ("maintenance_horizon_hours", float),
        ("rul_window", int),
        ("log_bucket_s", float),
        ("log_rate_per_min", float),
        ("log_source", str),
    )
    for name, cast in scalars:
        if name in doc:
            try:
                kwargs[name] = cast(doc[name])
            except (TypeError, ValueError):
                violations.append(f"{name}: expected {cast.__name__}")
    if "persistence_path" in kwargs and not Path(kwargs["persistence_path"]).is_absolute():
        kwargs["persistence_path"] = str(base / kwargs["persistence_path"])
    elif "persistence_path" not in kwargs:
        kwargs["persistence_path"] = str(base / "alerts.journal")

    if "otdr_params" in doc:
        try:
            kwargs["otdr_params"] = _otdr_params_from(doc["otdr_params"])
        except (SimulationError, TypeError, ValueError) as exc:
            violations.append(f"otdr_params: {exc}")
    detectors = doc.get("detectors", {})
    for key, attr, default in (
        ("otdr", "otdr_detector", OTDR_DETECTOR),
        ("telemetry", "telemetry_detector", TELEMETRY_DETECTOR),
        ("logs", "log_detector", LOG_DETECTOR),
    ):
        if key in detectors:
            try:
                kwargs[attr] = _detector_from(detectors[key], default)
            except (TypeError, ValueError) as exc:
                violations.append(f"detectors.{key}: {exc}")

    try:
        config = MonitorConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        violations.append(str(exc))
        raise ConfigError(violations) from None
    violations.extend(config.validate())
    if violations:
        raise ConfigError(violations)
    return config


def resolve_config_path(cli_path: Optional[str]) -> str:
    """CLI flag wins; fall back to the DEEPALM_CONFIG environment variable."""
    if cli_path:
        return cli_path
    env = os.environ.get(ENV_CONFIG_PATH)
    if env:
        return env
    raise ConfigError(
        [f"no config path given and ${ENV_CONFIG_PATH} is not set"]
    )
