"""Deterministic test-signal generation: tones, shaped compressor-style noise,
the turbulence frequency relation, and multi-phase experiment scenes.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014), a 64-bit
generator defined purely by its constants, so identical seeds produce
bit-identical signals on every platform:

    state_i = seed + (i+1) * 0x9E3779B97F4A7C15   (mod 2^64)
    z = state_i; z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31

Each output is mapped to [0, 1) via (z >> 11) * 2^-53.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dsp import IirSpec, SampleBuffer, iir_apply, rms, round_half_away

__all__ = [
    "LeakSourceSpec",
    "ScenePhase",
    "Scene",
    "strouhal_frequency",
    "synth_tone",
    "synth_noise",
    "compose_scene",
    "three_phase_scene",
    "derive_seed",
]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, k: int) -> int:
    """Deterministic child seed number ``k`` of ``seed``."""
    return _mix64((seed + (k + 1) * _GAMMA) & _MASK64)


def _uniform01(seed: int, n: int) -> np.ndarray:
    """First ``n`` SplitMix64 outputs of ``seed``, mapped to [0, 1)."""
    idx = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + idx * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class LeakSourceSpec:
    """Inputs of the empirical turbulence frequency relation f = k * v / d."""

    k_coeff: float
    velocity_mps: float
    hole_diameter_m: float

    def __post_init__(self):
        for name in ("k_coeff", "velocity_mps", "hole_diameter_m"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")


def strouhal_frequency(spec: LeakSourceSpec) -> float:
    """Leak-jet tone frequency from flow velocity and hole diameter."""
    return spec.k_coeff * spec.velocity_mps / spec.hole_diameter_m


_PHASE_LABELS = ("silence", "noise", "noise_plus_leak")


@dataclass(frozen=True)
class ScenePhase:
    """One stretch of a scene: silence, shaped noise, or noise plus a leak tone."""

    label: str
    duration_s: float
    noise_amplitude: float = 0.0
    leak_amplitude: float = 0.0
    leak_freq_hz: float = 26000.0

    def __post_init__(self):
        if self.label not in _PHASE_LABELS:
            raise ValueError(f"unknown phase label {self.label!r}")
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ValueError("duration_s must be positive")
        if self.noise_amplitude < 0 or self.leak_amplitude < 0:
            raise ValueError("amplitudes must be nonnegative")
        if self.label == "silence" and (self.noise_amplitude or self.leak_amplitude):
            raise ValueError("silence phases must have zero amplitudes")
        if self.label == "noise" and self.leak_amplitude:
            raise ValueError("noise phases must have zero leak amplitude")
        if self.leak_freq_hz <= 0:
            raise ValueError("leak_freq_hz must be positive")


@dataclass(frozen=True)
class Scene:
    """Ordered phases plus everything needed to render them deterministically.

    ``floor_amplitude`` adds a white sensor-floor term across all phases so a
    rendered scene has a nonzero quiescent level like a real capture chain;
    the default of 0 keeps pure phases exactly silent.
    """

    phases: tuple
    sample_rate_hz: float = 62500.0
    seed: int = 0
    floor_amplitude: float = 0.0
    noise_cutoff_hz: float = 1000.0
    noise_poles: int = 6

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ValueError("scene needs at least one phase")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.floor_amplitude < 0:
            raise ValueError("floor_amplitude must be nonnegative")


def synth_tone(
    freq_hz: float,
    amplitude: float,
    sample_rate_hz: float,
    duration_s: float,
    phase_rad: float = 0.0,
) -> SampleBuffer:
    """Pure sine: amplitude * sin(2*pi*f*i/fs + phase)."""
    if freq_hz <= 0 or freq_hz >= sample_rate_hz / 2:
        raise ValueError(
            f"freq_hz must lie in (0, Nyquist={sample_rate_hz / 2}), got {freq_hz}"
        )
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    n = round_half_away(duration_s * sample_rate_hz)
    i = np.arange(n, dtype=np.float64)
    samples = amplitude * np.sin(2.0 * math.pi * freq_hz * i / sample_rate_hz + phase_rad)
    return SampleBuffer(samples, sample_rate_hz)


def synth_noise(
    amplitude: float,
    lowpass_cutoff_hz: float,
    sample_rate_hz: float,
    duration_s: float,
    seed: int,
    poles: int = 6,
) -> SampleBuffer:
    """Seeded low-frequency noise.

    Uniform white noise in [-amplitude, amplitude] shaped by a cascade of
    ``poles`` identical one-pole low-pass stages
    y[n] = y[n-1] + beta*(x[n] - y[n-1]), beta = dt/(RC + dt),
    RC = 1/(2*pi*cutoff), then rescaled so the output RMS equals
    amplitude/sqrt(3) (the RMS of the unshaped white noise).  ``poles=0``
    yields plain white noise.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    if not (0 < lowpass_cutoff_hz < sample_rate_hz / 2):
        raise ValueError("lowpass_cutoff_hz must lie in (0, Nyquist)")
    if poles < 0:
        raise ValueError("poles must be nonnegative")
    n = round_half_away(duration_s * sample_rate_hz)
    white = amplitude * (2.0 * _uniform01(seed, n) - 1.0)
    buf = SampleBuffer(white, sample_rate_hz)
    if poles == 0 or amplitude == 0 or n == 0:
        return buf
    rc = 1.0 / (2.0 * math.pi * lowpass_cutoff_hz)
    dt = 1.0 / sample_rate_hz
    beta = dt / (rc + dt)
    stage = IirSpec(feedback=(-(1.0 - beta),), feedforward=(beta,))
    for _ in range(poles):
        buf = iir_apply(stage, buf)
    measured = rms(buf.samples)
    if measured > 0:
        buf = SampleBuffer(buf.samples * ((amplitude / math.sqrt(3.0)) / measured), sample_rate_hz)
    return buf


def compose_scene(scene: Scene) -> tuple[SampleBuffer, list[tuple[str, float, float]]]:
    """Render a scene to one buffer plus ground-truth phase annotations.

    Annotation boundaries are the cumulative rounded phase sample counts
    divided by the sample rate.  Phase noise uses child seed i+1 for phase i;
    the sensor floor uses child seed 0.
    """
    fs = scene.sample_rate_hz
    segments = []
    annotations = []
    total = 0
    for i, phase in enumerate(scene.phases):
        n = round_half_away(phase.duration_s * fs)
        seg = np.zeros(n)
        if phase.noise_amplitude > 0:
            seg += synth_noise(
                phase.noise_amplitude,
                scene.noise_cutoff_hz,
                fs,
                phase.duration_s,
                derive_seed(scene.seed, i + 1),
                poles=scene.noise_poles,
            ).samples
        if phase.leak_amplitude > 0:
            seg += synth_tone(phase.leak_freq_hz, phase.leak_amplitude, fs, phase.duration_s).samples
        annotations.append((phase.label, total / fs, (total + n) / fs))
        total += n
        segments.append(seg)
    samples = np.concatenate(segments) if segments else np.empty(0)
    if scene.floor_amplitude > 0 and total > 0:
        floor = scene.floor_amplitude * (2.0 * _uniform01(derive_seed(scene.seed, 0), total) - 1.0)
        samples = samples + floor
    return SampleBuffer(samples, fs), annotations


def three_phase_scene(
    seed: int,
    noise_amplitude: float = 2000.0,
    leak_amplitude: float = 400.0,
    leak_freq_hz: float = 26000.0,
    floor_amplitude: float = 40.0,
    sample_rate_hz: float = 62500.0,
    durations_s: tuple = (2.0, 3.0, 3.0),
    noise_cutoff_hz: float = 1000.0,
    noise_poles: int = 6,
) -> Scene:
    """Quiet start, then compressor noise, then noise plus an ultrasonic leak
    tone -- the standard three-phase test protocol.  Set ``leak_amplitude=0``
    for a leak-free control scene."""
    phases = (
        ScenePhase("silence", durations_s[0]),
        ScenePhase("noise", durations_s[1], noise_amplitude=noise_amplitude),
        ScenePhase(
            "noise_plus_leak",
            durations_s[2],
            noise_amplitude=noise_amplitude,
            leak_amplitude=leak_amplitude,
            leak_freq_hz=leak_freq_hz,
        ),
    )
    return Scene(
        phases=phases,
        sample_rate_hz=sample_rate_hz,
        seed=seed,
        floor_amplitude=floor_amplitude,
        noise_cutoff_hz=noise_cutoff_hz,
        noise_poles=noise_poles,
    )
