"""Trace processing: from raw backscatter samples to localized, classified
events and a fault diagnosis against a stored baseline.

The detection pipeline:

1. find the analysis span (everything usefully above the noise floor);
2. mask reflective peak regions found from single-sample rises;
3. fit the fiber slope by least squares outside the masks, then refit with a
   common slope and free per-segment intercepts once rough loss steps are
   known (steps bias a single global fit);
4. run the shared CUSUM changepoint detector on the detrended residual,
   re-anchored after every alarm so a staircase of several events yields one
   alarm each; the event sample is recovered by walking the alarm back to
   the start of its accumulation run;
5. measure each event's loss from short windows on either side (the pulse
   width around the event is excluded) and recover reflectance by inverting
   the peak-height relation.

Positions follow OTDR practice: rising-edge sample for reflective events,
first changed sample for loss events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence

import numpy as np

from .detectors import DetectorConfig, Series, cusum_changepoints, greedy_match
from .fiber import FiberRoute, OtdrTrace

DEFAULT_MIN_LOSS_DB = 0.3
DEFAULT_MIN_PEAK_DB = 2.0
DEFAULT_LOSS_TOLERANCE_DB = 0.3
DEFAULT_END_MARGIN_DB = 6.0

OTDR_DETECTOR = DetectorConfig(
    ewma_lambda=0.3,
    z_threshold=4.0,
    cusum_drift_k=0.1,
    cusum_threshold_h=0.5,
    min_separation=2,
)

RECOMMENDED_ACTIONS = {
    "fiber_cut": "Dispatch a splicing crew to the break position and reroute affected services.",
    "new_bend": "Inspect the span for new mechanical stress near the position; relieve and re-measure.",
    "degraded_splice": "Schedule cleaning or re-termination of the joint at the located position.",
    "sensor_trigger": "Check the premises sensor at the located position and correlate with site access.",
    "none": "No action required.",
}


class AnalysisError(ValueError):
    """Trace unusable for analysis."""


@dataclass(frozen=True)
class DetectedEvent:
    """A localized feature on one trace."""

    position_m: float
    kind: str  # "reflective" | "loss" | "fiber_end"
    loss_db: float
    reflectance_db: Optional[float] = None
    confidence: float = 1.0
    width_m: float = 0.0

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "position_m": self.position_m,
            "kind": self.kind,
            "loss_db": self.loss_db,
            "confidence": self.confidence,
            "width_m": self.width_m,
        }
        if self.reflectance_db is not None:
            doc["reflectance_db"] = self.reflectance_db
        return doc

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "DetectedEvent":
        return DetectedEvent(
            position_m=float(doc["position_m"]),
            kind=str(doc["kind"]),
            loss_db=float(doc["loss_db"]),
            reflectance_db=(
                float(doc["reflectance_db"]) if doc.get("reflectance_db") is not None else None
            ),
            confidence=float(doc.get("confidence", 1.0)),
            width_m=float(doc.get("width_m", 0.0)),
        )


@dataclass(frozen=True)
class TraceDiff:
    """Change of one trace against its baseline."""

    end_shift_m: float
    current_end_m: float
    sample_spacing_m: float
    new_events: tuple[DetectedEvent, ...]
    vanished_events: tuple[DetectedEvent, ...]
    changed_events: tuple[tuple[DetectedEvent, DetectedEvent], ...]

    @property
    def is_empty(self) -> bool:
        return (
            not self.new_events
            and not self.vanished_events
            and not self.changed_events
            and abs(self.end_shift_m) <= 3 * self.sample_spacing_m
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "end_shift_m": self.end_shift_m,
            "current_end_m": self.current_end_m,
            "sample_spacing_m": self.sample_spacing_m,
            "new_events": [e.to_json() for e in self.new_events],
            "vanished_events": [e.to_json() for e in self.vanished_events],
            "changed_events": [
                {"before": b.to_json(), "after": a.to_json()} for b, a in self.changed_events
            ],
        }


@dataclass(frozen=True)
class FaultDiagnosis:
    """Root-cause call for one trace diff."""

    fault_kind: str  # fiber_cut | degraded_splice | new_bend | sensor_trigger | none
    position_m: Optional[float]
    severity: str  # critical | major | minor | info
    evidence: str
    recommended_action: str

    def to_json(self) -> dict[str, Any]:
        return {
            "fault_kind": self.fault_kind,
            "position_m": self.position_m,
            "severity": self.severity,
            "evidence": self.evidence,
            "recommended_action": self.recommended_action,
        }


def smooth_trace(trace: OtdrTrace, window_samples: int) -> OtdrTrace:
    """Centered moving average; the window shrinks symmetrically at the
    edges so the output keeps the input length."""
    n = len(trace.samples)
    if window_samples < 1 or window_samples % 2 == 0:
        raise AnalysisError("smoothing window must be odd and >= 1")
    if window_samples > n:
        raise AnalysisError("smoothing window larger than trace")
    if window_samples == 1:
        return trace
    half = window_samples // 2
    x = np.asarray(trace.samples)
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        out[i] = x[lo:hi].mean()
    return replace(trace, samples=tuple(float(v) for v in out))


def find_fiber_end(trace: OtdrTrace, margin_db: float = DEFAULT_END_MARGIN_DB) -> float:
    """Position of the last sample whose lightly smoothed level clears the
    noise floor by ``margin_db``; 0.0 when the whole trace sits at the floor."""
    if margin_db <= 0:
        raise AnalysisError("margin_db must be > 0")
    window = 3 if len(trace.samples) >= 3 else 1
    smoothed = smooth_trace(trace, window)
    threshold = trace.params.noise_floor_db + margin_db
    last = -1
    for i, v in enumerate(smoothed.samples):
        if v >= threshold:
            last = i
    if last < 0:
        return 0.0
    return trace.position_of(last)


def _estimate_noise_std(x: np.ndarray) -> float:
    """Robust noise estimate from first differences (steps and peaks are too
    sparse to move the median)."""
    if len(x) < 3:
        return 0.0
    d = np.diff(x)
    mad = float(np.median(np.abs(d - np.median(d))))
    return mad / (math.sqrt(2.0) * 0.6744897501960817)


def _peak_regions(
    x: np.ndarray, end_idx: int, min_peak_db: float, pulse_samples: int
) -> list[tuple[int, int]]:
    """Rough reflective regions [start, end] (inclusive) from single-sample
    rises of at least ``min_peak_db``; the extent follows the samples that
    stay at least half the threshold above the pre-edge level."""
    regions: list[tuple[int, int]] = []
    i = 1
    max_extent = max(5 * pulse_samples, pulse_samples + 2)
    while i <= end_idx:
        if x[i] - x[i - 1] >= min_peak_db:
            base = x[i - 1]
            j = i
            while j <= end_idx and j - i < max_extent and x[j] >= base + min_peak_db / 2.0:
                j += 1
            regions.append((i, j - 1))
            i = j + 1
        else:
            i += 1
    merged: list[tuple[int, int]] = []
    for start, end in regions:
        if merged and start <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def _segmented_steps(
    values: np.ndarray, config: DetectorConfig, anchor_window: int = 5
) -> list[tuple[int, str]]:
    """Find step onsets in an approximately piecewise-constant series by
    running the shared CUSUM detector segment by segment: anchor the baseline
    mean locally, take the first alarm, walk it back to the start of its
    accumulation run, then restart just past the onset. Returns
    (onset_index, direction) pairs."""
    n = len(values)
    onsets: list[tuple[int, str]] = []
    seg_start = 0
    k = config.cusum_drift_k
    while seg_start < n - 1:
        w = min(anchor_window, n - seg_start)
        mu0 = float(np.mean(values[seg_start : seg_start + w]))
        series = Series(values[seg_start:].tolist(), start_index=seg_start)
        alarms = cusum_changepoints(series, config, mu0)
        if not alarms:
            break
        alarm = alarms[0]
        t = alarm.index
        if alarm.direction == "down":
            while t > seg_start and (mu0 - values[t - 1] - k) > 0:
                t -= 1
        else:
            while t > seg_start and (values[t - 1] - mu0 - k) > 0:
                t -= 1
        onsets.append((t, alarm.direction))
        seg_start = t if t > seg_start else alarm.index + 1
    return onsets


def _pooled_slope(
    z: np.ndarray, x: np.ndarray, boundaries: Sequence[int]
) -> Optional[float]:
    """Common slope across segments with independent intercepts (segments
    split at the given boundary indices); None when degenerate."""
    edges = [0, *sorted(set(boundaries)), len(x)]
    num = 0.0
    den = 0.0
    for lo, hi in zip(edges, edges[1:]):
        if hi - lo < 2:
            continue
        zs = z[lo:hi]
        xs = x[lo:hi]
        zc = zs - zs.mean()
        num += float(np.dot(zc, xs - xs.mean()))
        den += float(np.dot(zc, zc))
    if den <= 0.0:
        return None
    return num / den


def _window_means(
    values: np.ndarray, center: int, gap: int, width: int
) -> Optional[tuple[float, float]]:
    """Means of ``width``-sample windows before and after ``center``,
    skipping ``gap`` samples on each side; None if either side is empty."""
    lo_hi = center - gap
    lo_lo = max(0, lo_hi - width)
    hi_lo = center + gap
    hi_hi = min(len(values), hi_lo + width)
    if lo_hi - lo_lo < 2 or hi_hi - hi_lo < 2:
        return None
    before = float(np.mean(values[lo_lo:lo_hi]))
    after = float(np.mean(values[hi_lo:hi_hi]))
    return before, after


def detect_events(
    trace: OtdrTrace,
    config: DetectorConfig = OTDR_DETECTOR,
    min_loss_db: float = DEFAULT_MIN_LOSS_DB,
    min_peak_db: float = DEFAULT_MIN_PEAK_DB,
) -> list[DetectedEvent]:
    """Locate and classify reflective and loss events on one trace.

    The fiber end itself is not reported; use :func:`find_fiber_end`.
    """
    x_full = np.asarray(trace.samples, dtype=float)
    if len(x_full) < 10:
        raise AnalysisError("trace too short")
    spacing = trace.params.sample_spacing_m
    pulse_samples = max(1, int(round(trace.params.pulse_width_m / spacing)))

    end_m = find_fiber_end(trace)
    end_idx = int(round(end_m / spacing))
    if end_idx < 10:
        return []
    x = x_full[: end_idx + 1]
    z = np.arange(len(x)) * spacing

    sigma = _estimate_noise_std(x)
    regions = _peak_regions(x, end_idx, min_peak_db, pulse_samples)

    mask = np.zeros(len(x), dtype=bool)
    for start, end in regions:
        mask[start : end + 1] = True
    keep = ~mask
    if int(keep.sum()) < 10:
        return []
    z_keep = z[keep]
    x_keep = x[keep]
    orig_idx = np.flatnonzero(keep)

    # Noise-adaptive CUSUM settings; the configured values act as floors.
    cusum_cfg = DetectorConfig(
        ewma_lambda=config.ewma_lambda,
        z_threshold=config.z_threshold,
        cusum_drift_k=max(config.cusum_drift_k, 2.0 * sigma),
        cusum_threshold_h=max(config.cusum_threshold_h, 8.0 * sigma),
        min_separation=config.min_separation,
    )

    # Pass 1: global fit, rough steps. Pass 2: slope refit with intercept
    # jumps at the rough steps, final steps on the clean residual.
    zc = z_keep - z_keep.mean()
    den = float(np.dot(zc, zc))
    slope = float(np.dot(zc, x_keep - x_keep.mean())) / den if den > 0 else 0.0
    rough = _segmented_steps(x_keep - slope * z_keep, cusum_cfg)
    refit = _pooled_slope(z_keep, x_keep, [t for t, _ in rough])
    if refit is not None:
        slope = refit
    residual = x_keep - slope * z_keep
    steps = _segmented_steps(residual, cusum_cfg)

    def confidence_of(magnitude: float) -> float:
        if sigma <= 0.0:
            return 1.0
        return min(1.0, abs(magnitude) / (3.0 * sigma))

    events: list[DetectedEvent] = []

    for onset, direction in steps:
        if direction != "down":
            continue
        windows = _window_means(residual, onset, pulse_samples, 5)
        if windows is None:
            continue
        before, after = windows
        loss = before - after
        if loss < min_loss_db:
            continue
        events.append(
            DetectedEvent(
                position_m=float(orig_idx[onset] * spacing),
                kind="loss",
                loss_db=loss,
                confidence=confidence_of(loss),
            )
        )

    residual_full = x - slope * z
    compact_of_orig = np.cumsum(keep) - 1  # nearest kept index at or before
    for start, end in regions:
        after_lo = int(compact_of_orig[min(end, len(x) - 1)]) + 1
        after_hi = min(len(residual), after_lo + 5)
        before_hi = int(compact_of_orig[start - 1]) + 1 if start > 0 else 0
        before_lo = max(0, before_hi - 5)
        if after_hi - after_lo < 2:
            continue
        after_mean = float(np.mean(residual[after_lo:after_hi]))
        height = float(np.max(residual_full[start : end + 1])) - after_mean
        if height < min_peak_db:
            continue
        loss = 0.0
        if before_hi - before_lo >= 2:
            loss = max(0.0, float(np.mean(residual[before_lo:before_hi])) - after_mean)
        events.append(
            DetectedEvent(
                position_m=float(start * spacing),
                kind="reflective",
                loss_db=loss,
                reflectance_db=trace.params.backscatter_coeff_db + 2.0 * height,
                confidence=confidence_of(height),
                width_m=float((end - start + 1) * spacing),
            )
        )

    # Dead-zone merge: a loss step right behind a reflective peak is that
    # event's own insertion loss (already measured into loss_db), and no two
    # events may sit closer than one pulse width. The reflective absorb span
    # is wider because noise can walk a step onset a few samples downstream.
    events.sort(key=lambda e: (e.position_m, e.kind))
    merged: list[DetectedEvent] = []
    merge_span = trace.params.pulse_width_m + 0.5 * spacing
    absorb_span = trace.params.pulse_width_m + 3.5 * spacing
    for ev in events:
        if merged:
            prev = merged[-1]
            gap = ev.position_m - prev.position_m
            if prev.kind == "reflective" and ev.kind == "loss" and gap <= absorb_span:
                continue
            if gap <= merge_span:
                if prev.kind == "loss" and ev.kind == "reflective":
                    merged[-1] = ev
                elif abs(ev.loss_db) > abs(prev.loss_db):
                    merged[-1] = ev
                continue
        merged.append(ev)
    return merged


def compare_baseline(
    current: OtdrTrace,
    baseline: OtdrTrace,
    loss_tolerance_db: float = DEFAULT_LOSS_TOLERANCE_DB,
    position_tolerance_m: Optional[float] = None,
    config: DetectorConfig = OTDR_DETECTOR,
    min_loss_db: float = DEFAULT_MIN_LOSS_DB,
    min_peak_db: float = DEFAULT_MIN_PEAK_DB,
) -> TraceDiff:
    """Detect events on both traces and report what appeared, vanished, or
    changed, plus the fiber-end shift (negative = shortened)."""
    if current.route_id != baseline.route_id:
        raise AnalysisError(
            f"route mismatch: {current.route_id!r} vs {baseline.route_id!r}"
        )
    if current.params.sample_spacing_m != baseline.params.sample_spacing_m:
        raise AnalysisError("sample spacing mismatch between traces")
    spacing = current.params.sample_spacing_m
    if position_tolerance_m is None:
        position_tolerance_m = 3.0 * spacing

    current_events = detect_events(current, config, min_loss_db, min_peak_db)
    baseline_events = detect_events(baseline, config, min_loss_db, min_peak_db)
    current_end = find_fiber_end(current)
    baseline_end = find_fiber_end(baseline)

    pairs = greedy_match(
        [e.position_m for e in current_events],
        [e.position_m for e in baseline_events],
        position_tolerance_m,
    )
    matched_current = {i for i, _ in pairs}
    matched_baseline = {j for _, j in pairs}
    changed = tuple(
        (baseline_events[j], current_events[i])
        for i, j in sorted(pairs)
        if abs(current_events[i].loss_db - baseline_events[j].loss_db) >= loss_tolerance_db
    )
    return TraceDiff(
        end_shift_m=current_end - baseline_end,
        current_end_m=current_end,
        sample_spacing_m=spacing,
        new_events=tuple(
            e for i, e in enumerate(current_events) if i not in matched_current
        ),
        vanished_events=tuple(
            e for j, e in enumerate(baseline_events) if j not in matched_baseline
        ),
        changed_events=changed,
    )


def _near(position: float, anchors: Sequence[float], tolerance: float) -> bool:
    return any(abs(position - a) <= tolerance for a in anchors)


def diagnose_fault(diff: TraceDiff, route: FiberRoute) -> FaultDiagnosis:
    """Map a trace diff to a root-cause call via a fixed rule cascade
    (first match wins); total and deterministic."""
    tol = 3.0 * diff.sample_spacing_m
    connector_positions = [
        ev.position_m for ev in route.baseline_events if ev.kind in ("connector", "splice")
    ]
    sensor_positions = [
        ev.position_m for ev in route.baseline_events if ev.kind == "sensor_trigger"
    ]

    if diff.end_shift_m < -tol:
        return FaultDiagnosis(
            fault_kind="fiber_cut",
            position_m=diff.current_end_m,
            severity="critical",
            evidence=(
                f"fiber end moved {diff.end_shift_m:+.0f} m; "
                f"trace now ends near {diff.current_end_m:.0f} m"
            ),
            recommended_action=RECOMMENDED_ACTIONS["fiber_cut"],
        )

    for ev in diff.new_events:
        if ev.kind == "loss" and ev.loss_db >= 2.0:
            return FaultDiagnosis(
                fault_kind="new_bend",
                position_m=ev.position_m,
                severity="major",
                evidence=f"new {ev.loss_db:.2f} dB loss event at {ev.position_m:.0f} m",
                recommended_action=RECOMMENDED_ACTIONS["new_bend"],
            )

    for before, after in diff.changed_events:
        delta = after.loss_db - before.loss_db
        if delta >= 0.5 and _near(after.position_m, connector_positions, tol):
            return FaultDiagnosis(
                fault_kind="degraded_splice",
                position_m=after.position_m,
                severity="minor",
                evidence=(
                    f"loss at known joint {after.position_m:.0f} m grew by {delta:.2f} dB "
                    f"({before.loss_db:.2f} -> {after.loss_db:.2f} dB)"
                ),
                recommended_action=RECOMMENDED_ACTIONS["degraded_splice"],
            )

    for ev in diff.new_events:
        if (
            ev.kind == "loss"
            and 0.2 <= ev.loss_db < 2.0
            and _near(ev.position_m, sensor_positions, tol)
        ):
            return FaultDiagnosis(
                fault_kind="sensor_trigger",
                position_m=ev.position_m,
                severity="major",
                evidence=(
                    f"registered sensor at {ev.position_m:.0f} m shows a "
                    f"{ev.loss_db:.2f} dB signature"
                ),
                recommended_action=RECOMMENDED_ACTIONS["sensor_trigger"],
            )

    return FaultDiagnosis(
        fault_kind="none",
        position_m=None,
        severity="info",
        evidence="no significant change against baseline",
        recommended_action=RECOMMENDED_ACTIONS["none"],
    )
