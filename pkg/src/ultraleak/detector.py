"""Leak decisions from a windowed-RMS series: robust baseline, factor
thresholds with hysteresis and debounce, event extraction, and scoring
against ground-truth scene annotations.

All thresholds are relative to the baseline, so decisions are invariant
under scaling the whole series by any positive constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dsp import RmsReport

__all__ = [
    "DetectorConfig",
    "DetectionEvent",
    "Score",
    "estimate_baseline",
    "detect",
    "score",
]


@dataclass(frozen=True)
class DetectorConfig:
    """Decision rule parameters.

    The defaults (10 baseline windows, trigger at 3x baseline, release at
    2x, 2-window debounce) detect the standard three-phase synthetic scenes
    cleanly with no false positives.
    """

    baseline_windows: int = 10
    trigger_factor: float = 3.0
    release_factor: float = 2.0
    min_trigger_windows: int = 2

    def __post_init__(self):
        if self.baseline_windows < 2:
            raise ValueError("baseline_windows must be at least 2")
        if self.trigger_factor <= 1.0:
            raise ValueError("trigger_factor must exceed 1")
        if not (1.0 < self.release_factor <= self.trigger_factor):
            raise ValueError("release_factor must lie in (1, trigger_factor]")
        if self.min_trigger_windows < 1:
            raise ValueError("min_trigger_windows must be positive")


@dataclass(frozen=True)
class DetectionEvent:
    """A time interval where ultrasonic energy exceeded the baseline."""

    t_start_s: float
    t_end_s: float
    peak_rms: float
    mean_rms: float


@dataclass(frozen=True)
class Score:
    """Event/annotation agreement.  Latency is the mean of (event start -
    leak-phase start) over matched pairs, None when nothing matched."""

    true_positives: int
    false_positives: int
    false_negatives: int
    detection_latency_s: Optional[float]


def estimate_baseline(reports: Sequence[RmsReport], n: int) -> tuple[float, float]:
    """Median and median absolute deviation of the first ``n`` report values."""
    if n < 2:
        raise ValueError("baseline needs at least 2 reports")
    if len(reports) < n:
        raise ValueError(f"insufficient data: {len(reports)} reports, need {n}")
    values = np.array([r.rms for r in reports[:n]])
    baseline = float(np.median(values))
    spread = float(np.median(np.abs(values - baseline)))
    return baseline, spread


def _window_start(reports: Sequence[RmsReport], i: int) -> float:
    return reports[i - 1].t_end_s if i > 0 else 0.0


def detect(reports: Sequence[RmsReport], config: DetectorConfig = DetectorConfig()) -> list[DetectionEvent]:
    """Extract leak events from a time-ordered report series.

    The baseline is frozen over the first ``baseline_windows`` reports.  An
    event opens once ``min_trigger_windows`` consecutive reports reach
    trigger_factor * baseline (its start is the first such window) and closes
    at the first report below release_factor * baseline, or at stream end.
    """
    if len(reports) <= config.baseline_windows:
        raise ValueError(
            f"insufficient data: {len(reports)} reports, need more than {config.baseline_windows}"
        )
    baseline, _ = estimate_baseline(reports, config.baseline_windows)
    trigger = config.trigger_factor * baseline
    release = config.release_factor * baseline

    events = []
    open_start_idx = None
    run_start_idx = None
    run_length = 0
    segment: list[float] = []

    def close(idx: int) -> None:
        nonlocal open_start_idx, segment
        events.append(
            DetectionEvent(
                t_start_s=_window_start(reports, open_start_idx),
                t_end_s=reports[idx].t_end_s,
                peak_rms=max(segment),
                mean_rms=float(np.mean(segment)),
            )
        )
        open_start_idx = None
        segment = []

    for i in range(config.baseline_windows, len(reports)):
        value = reports[i].rms
        if open_start_idx is None:
            if value >= trigger:
                if run_length == 0:
                    run_start_idx = i
                run_length += 1
                if run_length >= config.min_trigger_windows:
                    open_start_idx = run_start_idx
                    segment = [reports[j].rms for j in range(run_start_idx, i + 1)]
                    run_length = 0
            else:
                run_length = 0
        else:
            if value < release:
                close(i - 1)
            else:
                segment.append(value)
    if open_start_idx is not None:
        close(len(reports) - 1)
    return events


def _overlaps(event: DetectionEvent, t0: float, t1: float) -> bool:
    return event.t_start_s < t1 and event.t_end_s > t0


def score(
    events: Sequence[DetectionEvent], truth: Sequence[tuple[str, float, float]]
) -> Score:
    """Score events against annotations; leak phases are the positives."""
    leaks = [(t0, t1) for label, t0, t1 in truth if label == "noise_plus_leak"]
    tp = 0
    fp = 0
    latencies = []
    matched = set()
    for event in events:
        hit = None
        for j, (t0, t1) in enumerate(leaks):
            if _overlaps(event, t0, t1):
                hit = j
                break
        if hit is None:
            fp += 1
        else:
            tp += 1
            if hit not in matched:
                matched.add(hit)
                latencies.append(event.t_start_s - leaks[hit][0])
    fn = len(leaks) - len(matched)
    latency = float(np.mean(latencies)) if latencies else None
    return Score(
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        detection_latency_s=latency,
    )
