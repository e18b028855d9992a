"""Host-side ultrasonic leak-detection toolkit.

Pipeline: synthesize or ingest a 62,500 sps sample stream, high-pass it
above 20 kHz with a single-pole IIR filter, report windowed RMS every
200 ms, and raise leak events when the ultrasonic energy exceeds an
adaptive-free baseline.  Includes bit-exact WAV/CSV/serial-frame codecs and
a capture-link budget analyzer.
"""

from .detector import DetectionEvent, DetectorConfig, Score, detect, estimate_baseline, score
from .dsp import (
    FilterDesign,
    FilterState,
    IirSpec,
    RmsReport,
    RmsWindower,
    SampleBuffer,
    SampleRateMismatchError,
    design_highpass,
    highpass_buffer,
    highpass_gain,
    highpass_step,
    iir_apply,
    rms,
    spectrum,
    windowed_rms,
)
from .estimators import HighpassTransformer, LeakEventClassifier, WindowedRmsTransformer
from .stream_io import (
    ChunkFrame,
    FrameDecoder,
    GapReport,
    LinkBudget,
    MalformedWavError,
    SerialFraming,
    TruncatedDataError,
    crc16_ccitt_false,
    csv_export,
    csv_import,
    frame_decode_stream,
    frame_encode,
    link_budget,
    wav_read,
    wav_write,
)
from .synth import (
    LeakSourceSpec,
    Scene,
    ScenePhase,
    compose_scene,
    strouhal_frequency,
    synth_noise,
    synth_tone,
    three_phase_scene,
)

__version__ = "0.1.0"
