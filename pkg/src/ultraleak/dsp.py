"""Core signal kernels: filter design, first-order high-pass, general IIR,
RMS, windowed RMS reporting, and a DFT magnitude spectrum.

All kernels are pure functions computed in double precision.  Filter state is
an explicit value so a sample stream can be processed in chunks of any size
with output bit-identical to whole-buffer processing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

__all__ = [
    "SampleBuffer",
    "FilterDesign",
    "FilterState",
    "IirSpec",
    "RmsReport",
    "SampleRateMismatchError",
    "design_highpass",
    "highpass_step",
    "highpass_buffer",
    "iir_apply",
    "rms",
    "RmsWindower",
    "windowed_rms",
    "spectrum",
    "highpass_gain",
    "round_half_away",
]


class SampleRateMismatchError(ValueError):
    """A buffer's sample rate disagrees with the filter design's."""


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def _require_positive(name: str, value: float) -> float:
    value = _require_finite(name, value)
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def round_half_away(value: float) -> int:
    """Round to nearest integer, ties away from zero."""
    return int(math.floor(value + 0.5)) if value >= 0 else int(math.ceil(value - 0.5))


@dataclass
class SampleBuffer:
    """A finite run of PCM-range samples at a fixed sample rate.

    Samples are held as float64; integer PCM is converted on ingest.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        self.sample_rate_hz = _require_positive("sample_rate_hz", self.sample_rate_hz)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass(frozen=True)
class FilterDesign:
    """Single-pole high-pass design: cutoff, sample rate and the coefficient
    alpha = fs / (fs + 2*pi*fc), equivalently RC/(RC + dt) with RC = 1/(2*pi*fc)."""

    cutoff_hz: float
    sample_rate_hz: float
    alpha: float


@dataclass(frozen=True)
class FilterState:
    """Previous input and previous output of the high-pass recurrence.

    A fresh state is (0, 0).  After a sample is processed, prev_input is that
    sample and prev_output is the emitted output.
    """

    prev_input: float = 0.0
    prev_output: float = 0.0


@dataclass(frozen=True)
class IirSpec:
    """General IIR coefficients: y[n] = -sum(a_k y[n-k]) + sum(b_k x[n-k]).

    ``feedback`` holds a_1..a_N (empty means FIR); ``feedforward`` holds b_0..b_M.
    """

    feedback: tuple
    feedforward: tuple

    def __post_init__(self):
        object.__setattr__(self, "feedback", tuple(float(c) for c in self.feedback))
        object.__setattr__(self, "feedforward", tuple(float(c) for c in self.feedforward))
        if len(self.feedforward) == 0:
            raise ValueError("feedforward must contain at least b_0")
        for c in self.feedback + self.feedforward:
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient {c!r}")


@dataclass(frozen=True)
class RmsReport:
    """One windowed RMS measurement: window end time, RMS, window length."""

    t_end_s: float
    rms: float
    n_samples: int


def design_highpass(cutoff_hz: float, sample_rate_hz: float) -> FilterDesign:
    """Design the single-pole high-pass coefficient for a cutoff and rate."""
    fc = _require_positive("cutoff_hz", cutoff_hz)
    fs = _require_positive("sample_rate_hz", sample_rate_hz)
    alpha = fs / (fs + 2.0 * math.pi * fc)
    return FilterDesign(cutoff_hz=fc, sample_rate_hz=fs, alpha=alpha)


@njit(cache=True)
def _df2t(b, a, x, z):
    """Direct-form II transposed evaluation.  ``a`` is normalized (a[0] == 1)
    and both coefficient arrays are padded to order+1; ``z`` has length order
    and is updated in place."""
    order = z.shape[0]
    y = np.empty_like(x)
    for n in range(x.shape[0]):
        xn = x[n]
        yn = z[0] + b[0] * xn
        for k in range(order - 1):
            z[k] = z[k + 1] + b[k + 1] * xn - a[k + 1] * yn
        z[order - 1] = b[order] * xn - a[order] * yn
        y[n] = yn
    return y


def _hp_coeffs(design: FilterDesign):
    a = design.alpha
    return np.array([a, -a]), np.array([1.0, -a])


def highpass_step(design: FilterDesign, state: FilterState, x: float) -> tuple[FilterState, float]:
    """Advance the high-pass recurrence y[n] = alpha*(y[n-1] + x[n] - x[n-1])
    by one sample.  Returns the new state and the output sample."""
    x = _require_finite("x", x)
    b, a = _hp_coeffs(design)
    # Same operation order as the buffer kernel, so a fold of steps is
    # bit-identical to highpass_buffer.
    z0 = b[1] * state.prev_input - a[1] * state.prev_output
    y = z0 + b[0] * x
    return FilterState(prev_input=x, prev_output=y), y


def highpass_buffer(
    design: FilterDesign, state: FilterState, buffer: SampleBuffer
) -> tuple[FilterState, SampleBuffer]:
    """Filter a whole buffer, threading state so that chunked processing is
    bit-identical to one whole-buffer call."""
    if buffer.sample_rate_hz != design.sample_rate_hz:
        raise SampleRateMismatchError(
            f"buffer rate {buffer.sample_rate_hz} != design rate {design.sample_rate_hz}"
        )
    x = buffer.samples
    if len(x) == 0:
        return state, SampleBuffer(np.empty(0), buffer.sample_rate_hz)
    b, a = _hp_coeffs(design)
    z = np.array([b[1] * state.prev_input - a[1] * state.prev_output])
    y = _df2t(b, a, x, z)
    new_state = FilterState(prev_input=float(x[-1]), prev_output=float(y[-1]))
    return new_state, SampleBuffer(y, buffer.sample_rate_hz)


def iir_apply(spec: IirSpec, buffer: SampleBuffer) -> SampleBuffer:
    """Evaluate a general IIR in direct form with zero initial conditions."""
    b = np.asarray(spec.feedforward, dtype=np.float64)
    a = np.concatenate(([1.0], np.asarray(spec.feedback, dtype=np.float64)))
    order = max(len(a), len(b)) - 1
    x = buffer.samples
    if len(x) == 0:
        return SampleBuffer(np.empty(0), buffer.sample_rate_hz)
    if order == 0:
        return SampleBuffer(b[0] * x, buffer.sample_rate_hz)
    bp = np.zeros(order + 1)
    bp[: len(b)] = b
    ap = np.zeros(order + 1)
    ap[: len(a)] = a
    z = np.zeros(order)
    y = _df2t(bp, ap, x, z)
    return SampleBuffer(y, buffer.sample_rate_hz)


def rms(values) -> float:
    """Root-mean-square of a nonempty sequence."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("rms of empty input")
    return float(np.sqrt(np.mean(arr * arr)))


class RmsWindower:
    """Streaming windowed-RMS reporter.

    Filters incoming samples with a single persistent high-pass state (or
    passes them through when ``design`` is None), partitions the filtered
    stream into consecutive fixed-size windows and reports one RMS value per
    full window.  ``flush`` handles the trailing partial window: dropped when
    shorter than half a window, otherwise reported with its true length.

    Feeding a stream through several ``process`` calls yields exactly the
    same reports as a single call with the concatenated stream.
    """

    def __init__(
        self,
        design: Optional[FilterDesign],
        window_ms: float,
        sample_rate_hz: Optional[float] = None,
    ):
        window_ms = _require_positive("window_ms", window_ms)
        if design is None and sample_rate_hz is None:
            raise ValueError("sample_rate_hz is required when no filter design is given")
        self.design = design
        self.sample_rate_hz = float(sample_rate_hz if design is None else design.sample_rate_hz)
        self.window_samples = round_half_away(window_ms * self.sample_rate_hz / 1000.0)
        if self.window_samples < 1:
            raise ValueError(f"window of {window_ms} ms is shorter than one sample")
        self._state = FilterState()
        self._pending = np.empty(0)
        self._assigned = 0  # samples already emitted into reports

    def process(self, buffer: SampleBuffer) -> list[RmsReport]:
        if buffer.sample_rate_hz != self.sample_rate_hz:
            raise SampleRateMismatchError(
                f"buffer rate {buffer.sample_rate_hz} != windower rate {self.sample_rate_hz}"
            )
        if self.design is not None:
            self._state, filtered = highpass_buffer(self.design, self._state, buffer)
            data = filtered.samples
        else:
            data = buffer.samples
        self._pending = np.concatenate((self._pending, data))
        n = self.window_samples
        reports = []
        while len(self._pending) >= n:
            window = self._pending[:n]
            self._pending = self._pending[n:]
            self._assigned += n
            reports.append(
                RmsReport(t_end_s=self._assigned / self.sample_rate_hz, rms=rms(window), n_samples=n)
            )
        return reports

    def flush(self) -> list[RmsReport]:
        """Emit (or drop) the trailing partial window and reset it."""
        p = len(self._pending)
        reports = []
        if p > 0 and 2 * p >= self.window_samples:
            window = self._pending
            self._assigned += p
            reports.append(
                RmsReport(t_end_s=self._assigned / self.sample_rate_hz, rms=rms(window), n_samples=p)
            )
        self._pending = np.empty(0)
        return reports


def windowed_rms(
    design: Optional[FilterDesign], buffer: SampleBuffer, window_ms: float
) -> list[RmsReport]:
    """Filter a buffer (fresh state) and report RMS per consecutive window.

    Pass ``design=None`` for raw (unfiltered) windowed RMS.
    """
    if len(buffer) == 0:
        raise ValueError("windowed_rms of empty buffer")
    w = RmsWindower(design, window_ms, sample_rate_hz=buffer.sample_rate_hz)
    reports = w.process(buffer)
    reports.extend(w.flush())
    return reports


def spectrum(buffer: SampleBuffer, n: int) -> np.ndarray:
    """Magnitude of the DFT of the first ``n`` samples (rectangular window).

    Returns an array of (freq_hz, magnitude) rows for bins 0..n//2,
    with freq = k * fs / n.
    """
    n = int(n)
    if n < 2:
        raise ValueError("n must be at least 2")
    if n > len(buffer):
        raise ValueError(f"n={n} exceeds buffer length {len(buffer)}")
    x = buffer.samples[:n]
    mags = np.abs(np.fft.rfft(x))
    freqs = np.arange(mags.shape[0]) * (buffer.sample_rate_hz / n)
    return np.column_stack((freqs, mags))


def highpass_gain(design: FilterDesign, freq_hz: float) -> float:
    """Magnitude response |H(e^jw)| of the realized digital filter, with
    H(z) = alpha*(1 - z^-1) / (1 - alpha*z^-1)."""
    w = 2.0 * math.pi * freq_hz / design.sample_rate_hz
    z = np.exp(-1j * w)
    h = design.alpha * (1.0 - z) / (1.0 - design.alpha * z)
    return float(abs(h))
