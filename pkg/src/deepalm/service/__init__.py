"""Monitoring service: alert store, configuration, engine, and HTTP API."""

from .alerts import Alert, AlertStore, IllegalTransitionError, UnknownAlertError
from .clock import Clock, SimClock, WallClock
from .config import ConfigError, MonitorConfig, load_monitor_config, resolve_config_path
from .engine import IngestError, MonitorService, UnknownTargetError, run_scenario

__all__ = [
    "Alert",
    "AlertStore",
    "Clock",
    "ConfigError",
    "IllegalTransitionError",
    "IngestError",
    "MonitorConfig",
    "MonitorService",
    "SimClock",
    "UnknownAlertError",
    "UnknownTargetError",
    "WallClock",
    "load_monitor_config",
    "resolve_config_path",
    "run_scenario",
]
