"""Shared anomaly-detection primitives.

One small set of scoring/changepoint/threshold algorithms is reused verbatim
by the fiber-trace analyzer, the hardware-health estimator, and the log
analytics engine: every domain funnels its measurements into a plain
:class:`Series` and gets back :class:`ScoredPoint` lists. Everything here is
pure and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class Series:
    """Uniformly sampled sequence of finite values.

    ``spacing`` carries whatever unit the caller works in (meters between
    trace samples, seconds between log-rate buckets); ``start_index`` lets a
    slice of a longer record keep its original indexing.
    """

    values: tuple[float, ...]
    start_index: int = 0
    spacing: float = 1.0

    def __init__(self, values: Iterable[float], start_index: int = 0, spacing: float = 1.0):
        vals = tuple(float(v) for v in values)
        for v in vals:
            if not math.isfinite(v):
                raise ValueError("series values must be finite")
        if spacing <= 0:
            raise ValueError("series spacing must be > 0")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "start_index", int(start_index))
        object.__setattr__(self, "spacing", float(spacing))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DetectorConfig:
    """Knobs for the detector family; one instance per engine."""

    ewma_lambda: float = 0.3
    z_threshold: float = 4.0
    cusum_drift_k: float = 0.1
    cusum_threshold_h: float = 0.5
    min_separation: int = 1

    def __post_init__(self) -> None:
        if not (0.0 < self.ewma_lambda <= 1.0):
            raise ValueError("ewma_lambda must be in (0, 1]")
        if self.z_threshold <= 0:
            raise ValueError("z_threshold must be > 0")
        if self.cusum_drift_k < 0:
            raise ValueError("cusum_drift_k must be >= 0")
        if self.cusum_threshold_h <= 0:
            raise ValueError("cusum_threshold_h must be > 0")
        if self.min_separation < 1:
            raise ValueError("min_separation must be >= 1")


@dataclass(frozen=True)
class ScoredPoint:
    """One flagged sample: where, how strong, and which way it moved."""

    index: int
    score: float
    direction: str  # "up" | "down"


@dataclass(frozen=True)
class DetectionReport:
    """Greedy-matching tally of detections against ground truth."""

    matched: int
    missed: int
    spurious: int
    precision: float
    recall: float


def ewma_baseline(series: Series, lam: float) -> Series:
    """Exponentially weighted moving average, initialized at the first sample.

    s_0 = x_0, s_t = lam * x_t + (1 - lam) * s_{t-1}.
    """
    if len(series) == 0:
        raise ValueError("empty input")
    if not (0.0 < lam <= 1.0):
        raise ValueError("bad parameter: lambda must be in (0, 1]")
    out = []
    s = series.values[0]
    out.append(s)
    for x in series.values[1:]:
        s = lam * x + (1.0 - lam) * s
        out.append(s)
    return Series(out, start_index=series.start_index, spacing=series.spacing)


def zscore(series: Series, baseline_mean: float, baseline_std: float) -> list[ScoredPoint]:
    """Score every sample against a fixed baseline; direction follows sign."""
    if baseline_std <= 0:
        raise ValueError("degenerate baseline")
    points = []
    for i, x in enumerate(series.values):
        score = (x - baseline_mean) / baseline_std
        points.append(
            ScoredPoint(
                index=series.start_index + i,
                score=score,
                direction="up" if score > 0 else "down",
            )
        )
    return points


def cusum_changepoints(
    series: Series, config: DetectorConfig, baseline_mean: float
) -> list[ScoredPoint]:
    """Two-sided CUSUM against a fixed baseline mean.

    g+_t = max(0, g+_{t-1} + (x_t - mu0 - k)) and symmetrically for g-; an
    alarm is emitted at the first index where the accumulator reaches h
    (g >= h, so that a clean step of height d > k alarms exactly
    ceil(h / (d - k)) samples after the step). The firing accumulator resets
    to zero, the other side keeps running, so several sequential shifts on
    one series each get their own alarm. Crossings closer than
    ``min_separation`` samples to the previously emitted alarm are suppressed
    (the accumulator still resets).
    """
    if len(series) == 0:
        raise ValueError("empty input")
    k = config.cusum_drift_k
    h = config.cusum_threshold_h
    g_pos = 0.0
    g_neg = 0.0
    alarms: list[ScoredPoint] = []
    last_alarm: int | None = None
    for i, x in enumerate(series.values):
        g_pos = max(0.0, g_pos + (x - baseline_mean - k))
        g_neg = max(0.0, g_neg + (baseline_mean - x - k))
        for g, direction in ((g_pos, "up"), (g_neg, "down")):
            if g >= h:
                idx = series.start_index + i
                if last_alarm is None or idx - last_alarm >= config.min_separation:
                    alarms.append(ScoredPoint(index=idx, score=g, direction=direction))
                last_alarm = idx
                if direction == "up":
                    g_pos = 0.0
                else:
                    g_neg = 0.0
    return alarms


def threshold_events(
    points: Sequence[ScoredPoint], threshold: float, min_separation: int
) -> list[ScoredPoint]:
    """Keep points with |score| >= threshold, collapsing each run of nearby
    survivors (index gaps < min_separation) to its strongest member."""
    if threshold <= 0:
        raise ValueError("bad parameter: threshold must be > 0")
    kept = [p for p in points if abs(p.score) >= threshold]
    if not kept:
        return []
    kept.sort(key=lambda p: p.index)
    out: list[ScoredPoint] = []
    best = kept[0]
    prev_index = kept[0].index
    for p in kept[1:]:
        if p.index - prev_index < min_separation:
            if abs(p.score) > abs(best.score):
                best = p
        else:
            out.append(best)
            best = p
        prev_index = p.index
    out.append(best)
    return out


def greedy_match(
    detected: Sequence[float], truth: Sequence[float], tolerance: float
) -> list[tuple[int, int]]:
    """One-to-one matching in ascending |distance|, ties broken by ascending
    detected then truth position. Returns (detected_idx, truth_idx) pairs."""
    candidates = []
    for i, d in enumerate(detected):
        for j, t in enumerate(truth):
            dist = abs(d - t)
            if dist <= tolerance:
                candidates.append((dist, d, t, i, j))
    candidates.sort()
    used_d: set[int] = set()
    used_t: set[int] = set()
    pairs = []
    for _, _, _, i, j in candidates:
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        pairs.append((i, j))
    return pairs


def evaluate_detection(
    detected: Sequence[float], truth: Sequence[float], tolerance: float
) -> DetectionReport:
    """Tally matched/missed/spurious positions within an absolute tolerance."""
    if tolerance < 0:
        raise ValueError("bad parameter: tolerance must be >= 0")
    pairs = greedy_match(detected, truth, tolerance)
    matched = len(pairs)
    spurious = len(detected) - matched
    missed = len(truth) - matched
    precision = matched / (matched + spurious) if (matched + spurious) > 0 else 1.0
    recall = matched / (matched + missed) if (matched + missed) > 0 else 1.0
    return DetectionReport(
        matched=matched,
        missed=missed,
        spurious=spurious,
        precision=precision,
        recall=recall,
    )
