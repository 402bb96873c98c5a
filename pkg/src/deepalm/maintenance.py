"""Device telemetry simulation and remaining-useful-life estimation.

Degradation is modeled as linear drift plus Gaussian noise; RUL comes from a
least-squares trend over the most recent window, extrapolated to the failure
threshold. Accelerated-aging (stress-test) time maps to field time through
the Arrhenius acceleration factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from typing import Any, Optional

import numpy as np

from .detectors import DetectorConfig, ScoredPoint, Series, cusum_changepoints
from .prng import Xorshift64Star
from .serde import FORMAT_TELEMETRY, format_rfc3339, parse_rfc3339

BOLTZMANN_EV_PER_K = 8.617333262e-5

DEFAULT_T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


class MaintenanceError(ValueError):
    """Invalid profile, series, or estimation parameters."""


@dataclass(frozen=True)
class DeviceProfile:
    """Degradation model of one monitored hardware metric."""

    device_id: str
    metric_name: str
    nominal: float
    failure_threshold: float
    drift_per_hour: float
    noise_std: float = 0.0
    seed: int = 1

    def __post_init__(self) -> None:
        if self.failure_threshold == self.nominal:
            raise MaintenanceError("failure_threshold must differ from nominal")
        if self.noise_std < 0:
            raise MaintenanceError("noise_std must be >= 0")
        toward = self.failure_threshold - self.nominal
        # drift must point from nominal toward the threshold (or be zero)
        if self.drift_per_hour != 0.0 and (self.drift_per_hour > 0) != (toward > 0):
            raise MaintenanceError("drift_per_hour points away from failure_threshold")

    def to_json(self) -> dict[str, Any]:
        return {
            "device_id": self.device_id,
            "metric_name": self.metric_name,
            "nominal": self.nominal,
            "failure_threshold": self.failure_threshold,
            "drift_per_hour": self.drift_per_hour,
            "noise_std": self.noise_std,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "DeviceProfile":
        return DeviceProfile(
            device_id=str(doc["device_id"]),
            metric_name=str(doc["metric_name"]),
            nominal=float(doc["nominal"]),
            failure_threshold=float(doc["failure_threshold"]),
            drift_per_hour=float(doc["drift_per_hour"]),
            noise_std=float(doc.get("noise_std", 0.0)),
            seed=int(doc.get("seed", 1)),
        )


@dataclass(frozen=True)
class TelemetrySeries:
    """Uniformly sampled values of one device metric."""

    device_id: str
    metric_name: str
    t0: datetime
    step_s: float
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.step_s <= 0:
            raise MaintenanceError("step_s must be > 0")
        if len(self.values) < 1:
            raise MaintenanceError("empty telemetry series")
        if not all(math.isfinite(v) for v in self.values):
            raise MaintenanceError("telemetry values must be finite")

    @property
    def duration_hours(self) -> float:
        return (len(self.values) - 1) * self.step_s / 3600.0

    def time_of(self, index: int) -> datetime:
        return self.t0 + timedelta(seconds=index * self.step_s)

    def to_json(self) -> dict[str, Any]:
        return {
            "format": FORMAT_TELEMETRY,
            "device_id": self.device_id,
            "metric_name": self.metric_name,
            "t0": format_rfc3339(self.t0),
            "step_s": self.step_s,
            "values": list(self.values),
        }

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "TelemetrySeries":
        return TelemetrySeries(
            device_id=str(doc["device_id"]),
            metric_name=str(doc["metric_name"]),
            t0=parse_rfc3339(doc["t0"]),
            step_s=float(doc["step_s"]),
            values=tuple(float(v) for v in doc["values"]),
        )


@dataclass(frozen=True)
class RulEstimate:
    """Health index and remaining-useful-life from a trend fit.

    ``rul_hours`` is ``math.inf`` when the fitted slope does not move the
    metric toward its failure threshold.
    """

    device_id: str
    health_index: float
    rul_hours: float
    slope_per_hour: float
    fit_residual_std: float
    estimated_at: datetime

    def to_json(self) -> dict[str, Any]:
        return {
            "device_id": self.device_id,
            "health_index": self.health_index,
            # JSON has no Infinity; null marks "no predicted failure"
            "rul_hours": None if math.isinf(self.rul_hours) else self.rul_hours,
            "slope_per_hour": self.slope_per_hour,
            "fit_residual_std": self.fit_residual_std,
            "estimated_at": format_rfc3339(self.estimated_at),
        }


def generate_telemetry(
    profile: DeviceProfile,
    hours: float,
    step_s: float,
    t0: Optional[datetime] = None,
) -> TelemetrySeries:
    """value(t) = nominal + drift_per_hour * t_hours + N(0, noise_std),
    sampled every ``step_s`` from t=0 through ``hours`` inclusive."""
    if hours <= 0:
        raise MaintenanceError("hours must be > 0")
    if step_s <= 0:
        raise MaintenanceError("step_s must be > 0")
    n = int(math.floor(hours * 3600.0 / step_s)) + 1
    rng = Xorshift64Star(profile.seed)
    values = []
    for i in range(n):
        t_hours = i * step_s / 3600.0
        v = profile.nominal + profile.drift_per_hour * t_hours
        if profile.noise_std > 0:
            v += rng.gaussian(0.0, profile.noise_std)
        values.append(v)
    return TelemetrySeries(
        device_id=profile.device_id,
        metric_name=profile.metric_name,
        t0=t0 if t0 is not None else DEFAULT_T0,
        step_s=step_s,
        values=tuple(values),
    )


def acceleration_factor(activation_energy_ev: float, t_use_k: float, t_stress_k: float) -> float:
    """Arrhenius acceleration factor between a use and a stress temperature."""
    if activation_energy_ev <= 0:
        raise MaintenanceError("activation energy must be > 0")
    if t_use_k <= 0 or t_stress_k <= 0:
        raise MaintenanceError("temperatures must be > 0 K")
    return math.exp(
        (activation_energy_ev / BOLTZMANN_EV_PER_K) * (1.0 / t_use_k - 1.0 / t_stress_k)
    )


def derate_series(series: TelemetrySeries, af: float) -> TelemetrySeries:
    """Map stress-test time to field time: one stress step spans ``af`` field
    steps. Values are untouched."""
    if af < 1.0:
        raise MaintenanceError("acceleration factor must be >= 1")
    return replace(series, step_s=series.step_s * af)


def estimate_rul(series: TelemetrySeries, profile: DeviceProfile, window: int) -> RulEstimate:
    """Least-squares line over the last ``window`` samples; RUL is the time
    for the fitted value to reach the failure threshold."""
    n = len(series.values)
    if window < 2:
        raise MaintenanceError("window must be >= 2")
    if window > n:
        raise MaintenanceError(f"window {window} exceeds series length {n}")
    t = np.arange(n - window, n) * (series.step_s / 3600.0)
    v = np.asarray(series.values[n - window :], dtype=float)
    slope, intercept = np.polyfit(t, v, 1)
    slope, intercept = float(slope), float(intercept)
    # polyfit on constant data leaves ~1e-16 slope fuzz; a trend that moves
    # the metric less than machine noise across the window is no trend
    scale = max(1.0, float(np.max(np.abs(v))))
    if abs(slope) * float(t[-1] - t[0]) < 1e-9 * scale:
        slope, intercept = 0.0, float(np.mean(v))
    current_fit = slope * t[-1] + intercept
    residuals = v - (slope * t + intercept)
    toward = profile.failure_threshold - profile.nominal
    if slope != 0.0 and (slope > 0) == (toward > 0):
        rul = max(0.0, (profile.failure_threshold - current_fit) / slope)
    else:
        rul = math.inf
    health = (profile.failure_threshold - current_fit) / toward
    return RulEstimate(
        device_id=series.device_id,
        health_index=min(1.0, max(0.0, health)),
        rul_hours=rul,
        slope_per_hour=slope,
        fit_residual_std=float(np.std(residuals)),
        estimated_at=series.time_of(n - 1),
    )


def maintenance_flag(estimate: RulEstimate, horizon_hours: float) -> str:
    """ok | plan_maintenance | critical, from health and RUL vs. horizon."""
    if horizon_hours <= 0:
        raise MaintenanceError("horizon_hours must be > 0")
    if estimate.health_index < 0.1 or estimate.rul_hours < horizon_hours / 4.0:
        return "critical"
    if estimate.rul_hours < horizon_hours:
        return "plan_maintenance"
    return "ok"


def detect_drift_onset(
    series: TelemetrySeries, config: DetectorConfig, baseline_window: int = 5
) -> Optional[ScoredPoint]:
    """First changepoint of the metric away from its early baseline, via the
    shared CUSUM detector; None when the series never departs."""
    values = list(series.values)
    w = min(baseline_window, len(values))
    mu0 = sum(values[:w]) / w
    alarms = cusum_changepoints(Series(values, spacing=series.step_s), config, mu0)
    return alarms[0] if alarms else None
