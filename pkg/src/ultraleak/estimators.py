"""scikit-learn style wrappers so the pipeline composes with the wider
ecosystem: transformers for filtering and windowed RMS extraction, and a
predictor that flags signals containing a leak event.

Rows of ``X`` are independent signals sampled at ``sample_rate_hz``; each
row is processed from a fresh filter state.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import detector, dsp

__all__ = ["HighpassTransformer", "WindowedRmsTransformer", "LeakEventClassifier"]


class HighpassTransformer(TransformerMixin, BaseEstimator):
    """Row-wise single-pole high-pass filter."""

    def __init__(self, cutoff_hz: float = 20000.0, sample_rate_hz: float = 62500.0):
        self.cutoff_hz = cutoff_hz
        self.sample_rate_hz = sample_rate_hz

    def fit(self, X, y=None):
        check_array(X, ensure_2d=True)
        self.design_ = dsp.design_highpass(self.cutoff_hz, self.sample_rate_hz)
        return self

    def transform(self, X):
        check_is_fitted(self, "design_")
        X = check_array(X, ensure_2d=True)
        out = np.empty_like(X, dtype=np.float64)
        for i, row in enumerate(X):
            _, filtered = dsp.highpass_buffer(
                self.design_, dsp.FilterState(), dsp.SampleBuffer(row, self.sample_rate_hz)
            )
            out[i] = filtered.samples
        return out


class WindowedRmsTransformer(TransformerMixin, BaseEstimator):
    """Row-wise windowed RMS, optionally high-pass filtered first.

    Output has one column per full window (partial windows are dropped so
    every row yields the same number of columns).  ``cutoff_hz=None`` skips
    filtering.
    """

    def __init__(
        self,
        cutoff_hz: float | None = 20000.0,
        sample_rate_hz: float = 62500.0,
        window_ms: float = 200.0,
    ):
        self.cutoff_hz = cutoff_hz
        self.sample_rate_hz = sample_rate_hz
        self.window_ms = window_ms

    def fit(self, X, y=None):
        check_array(X, ensure_2d=True)
        self.design_ = (
            None
            if self.cutoff_hz is None
            else dsp.design_highpass(self.cutoff_hz, self.sample_rate_hz)
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "design_")
        X = check_array(X, ensure_2d=True)
        rows = []
        for row in X:
            reports = dsp.windowed_rms(
                self.design_, dsp.SampleBuffer(row, self.sample_rate_hz), self.window_ms
            )
            full = dsp.round_half_away(self.window_ms * self.sample_rate_hz / 1000.0)
            rows.append([r.rms for r in reports if r.n_samples == full])
        return np.asarray(rows, dtype=np.float64)


class LeakEventClassifier(BaseEstimator):
    """Predicts 1 for rows of windowed-RMS values that contain at least one
    leak event under the threshold/hysteresis rule.  ``fit`` only validates
    parameters; the baseline is taken per row from its leading windows."""

    def __init__(
        self,
        baseline_windows: int = 10,
        trigger_factor: float = 3.0,
        release_factor: float = 2.0,
        min_trigger_windows: int = 2,
        window_s: float = 0.2,
    ):
        self.baseline_windows = baseline_windows
        self.trigger_factor = trigger_factor
        self.release_factor = release_factor
        self.min_trigger_windows = min_trigger_windows
        self.window_s = window_s

    def _config(self) -> detector.DetectorConfig:
        return detector.DetectorConfig(
            baseline_windows=self.baseline_windows,
            trigger_factor=self.trigger_factor,
            release_factor=self.release_factor,
            min_trigger_windows=self.min_trigger_windows,
        )

    def fit(self, X, y=None):
        check_array(X, ensure_2d=True)
        self.config_ = self._config()
        return self

    def events(self, row) -> list:
        """Detection events for one series of windowed-RMS values."""
        check_is_fitted(self, "config_")
        reports = [
            dsp.RmsReport(t_end_s=(i + 1) * self.window_s, rms=float(v), n_samples=1)
            for i, v in enumerate(np.asarray(row, dtype=np.float64))
        ]
        return detector.detect(reports, self.config_)

    def predict(self, X):
        check_is_fitted(self, "config_")
        X = check_array(X, ensure_2d=True)
        return np.array([1 if self.events(row) else 0 for row in X], dtype=int)
