"""Bit-exact external formats: WAV PCM16 mono, the framed device-to-host
chunk protocol, CSV report export, and the capture-link budget analyzer.

Frame wire layout (little-endian):

    magic 0xAA 0x55 | version 0x01 | seq u32 | count u32 |
    count * i16 payload | CRC-16/CCITT-FALSE u16

The CRC (poly 0x1021, init 0xFFFF, no reflection, no final xor) covers all
bytes after the magic up to the payload end.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

import numpy as np

from .dsp import RmsReport, SampleBuffer

__all__ = [
    "MalformedWavError",
    "TruncatedDataError",
    "ChunkFrame",
    "GapReport",
    "SerialFraming",
    "LinkBudget",
    "crc16_ccitt_false",
    "wav_write",
    "wav_read",
    "frame_encode",
    "FrameDecoder",
    "frame_decode_stream",
    "link_budget",
    "csv_export",
    "csv_import",
    "pcm16_encode",
]

FRAME_MAGIC = b"\xaa\x55"
FRAME_VERSION = 1
_FRAME_HEADER = struct.Struct("<BII")  # version, seq, count


class MalformedWavError(ValueError):
    """The byte stream is not a PCM16 mono WAVE file."""


class TruncatedDataError(ValueError):
    """The data chunk declares more bytes than are present."""


@dataclass(frozen=True)
class ChunkFrame:
    """One decoded transfer unit of the serial chunk stream."""

    seq: int
    samples: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, ChunkFrame)
            and self.seq == other.seq
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(frozen=True)
class GapReport:
    """Sequence discontinuity between two successfully decoded frames."""

    after_seq: int
    next_seq: int
    missing: int


@dataclass(frozen=True)
class SerialFraming:
    """UART line framing; 8N1 is (8, 1, 0).  A start bit is always implied."""

    data_bits: int = 8
    stop_bits: int = 1
    parity_bits: int = 0

    @classmethod
    def parse(cls, text: str) -> "SerialFraming":
        """Parse compact notation like '8N1' or '7E1'."""
        if len(text) != 3 or not text[0].isdigit() or not text[2].isdigit():
            raise ValueError(f"unrecognized framing {text!r}, expected e.g. '8N1'")
        parity = {"N": 0, "E": 1, "O": 1}.get(text[1].upper())
        if parity is None:
            raise ValueError(f"unrecognized parity {text[1]!r} in framing {text!r}")
        return cls(data_bits=int(text[0]), stop_bits=int(text[2]), parity_bits=parity)


@dataclass(frozen=True)
class LinkBudget:
    """Capture rate vs. serial payload rate and whether continuous streaming
    can be lossless."""

    capture_rate_Bps: float
    link_rate_Bps: float
    duty_cycle: float
    lossless_continuous: bool


def _build_crc_table() -> list:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if (crc & 0x8000) else (crc << 1)
            crc &= 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _build_crc_table()


def crc16_ccitt_false(data: bytes, crc: int = 0xFFFF) -> int:
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ byte) & 0xFF]
    return crc


def pcm16_encode(samples: np.ndarray) -> np.ndarray:
    """Real samples to int16: round to nearest, ties away from zero, clamp."""
    arr = np.asarray(samples, dtype=np.float64)
    rounded = np.copysign(np.floor(np.abs(arr) + 0.5), arr)
    return np.clip(rounded, -32768, 32767).astype(np.int16)


def wav_write(buffer: SampleBuffer, sink) -> None:
    """Write a canonical 44-byte-header RIFF/WAVE PCM16 mono file."""
    sr = buffer.sample_rate_hz
    if sr != int(sr) or not (0 < int(sr) < 2**32):
        raise ValueError(f"sample rate {sr} not representable as unsigned 32-bit integer")
    sr = int(sr)
    data = pcm16_encode(buffer.samples).astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(data),
        b"WAVE",
        b"fmt ",
        16,
        1,  # PCM
        1,  # mono
        sr,
        sr * 2,
        2,
        16,
        b"data",
        len(data),
    )
    sink.write(header)
    sink.write(data)


def wav_read(source) -> SampleBuffer:
    """Read a PCM16 mono WAVE file back into a SampleBuffer.

    Unknown chunks are skipped; fmt fields are validated strictly.
    """
    raw = source.read()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWavError("missing RIFF/WAVE magic")
    pos = 12
    fmt = None
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body_start = pos + 8
        if cid == b"fmt ":
            if size < 16 or body_start + 16 > len(raw):
                raise MalformedWavError("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", raw, body_start)
            audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
            if audio_format != 1:
                raise MalformedWavError(f"audio_format must be 1 (PCM), got {audio_format}")
            if channels != 1:
                raise MalformedWavError(f"channels must be 1 (mono), got {channels}")
            if bits != 16:
                raise MalformedWavError(f"bits_per_sample must be 16, got {bits}")
        elif cid == b"data":
            if fmt is None:
                raise MalformedWavError("data chunk before fmt chunk")
            if body_start + size > len(raw):
                raise TruncatedDataError(
                    f"data chunk declares {size} bytes, only {len(raw) - body_start} present"
                )
            samples = np.frombuffer(raw[body_start : body_start + size], dtype="<i2")
            return SampleBuffer(samples.astype(np.float64), float(fmt[2]))
        # chunks are word-aligned
        pos = body_start + size + (size & 1)
    raise MalformedWavError("missing fmt or data chunk")


def frame_encode(seq: int, samples) -> bytes:
    """Encode one chunk frame; see the module docstring for the layout."""
    arr = np.asarray(samples)
    if arr.size == 0:
        raise ValueError("frame payload must be nonempty")
    payload = arr.astype("<i2").tobytes()
    body = _FRAME_HEADER.pack(FRAME_VERSION, seq & 0xFFFFFFFF, arr.size) + payload
    return FRAME_MAGIC + body + struct.pack("<H", crc16_ccitt_false(body))


class FrameDecoder:
    """Incremental, resynchronizing chunk-frame parser.

    Feed arbitrary bytes; receive ChunkFrame and GapReport events.  CRC
    failures discard the candidate and rescan from the byte after its magic,
    so any intact frame after a corrupted region is still recovered.
    ``max_samples`` bounds the count field a candidate header may claim, so
    corrupt headers cannot stall the parser indefinitely.
    """

    def __init__(self, max_samples: int = 1 << 20):
        self.max_samples = max_samples
        self._buf = bytearray()
        self._last_seq = None

    def feed(self, data: bytes) -> list:
        self._buf.extend(data)
        return self._scan(final=False)

    def finalize(self) -> list:
        """Signal end of stream; resolves any pending partial candidates."""
        events = self._scan(final=True)
        self._buf.clear()
        return events

    def _scan(self, final: bool) -> list:
        events = []
        buf = self._buf
        while True:
            start = bytes(buf).find(FRAME_MAGIC)
            if start < 0:
                # keep a trailing 0xAA in case 0x55 arrives next
                del buf[: max(0, len(buf) - 1)]
                return events
            if start > 0:
                del buf[:start]
            if len(buf) < 2 + _FRAME_HEADER.size:
                if not final:
                    return events
                del buf[:1]
                continue
            version, seq, count = _FRAME_HEADER.unpack_from(buf, 2)
            frame_len = 2 + _FRAME_HEADER.size + 2 * count + 2
            if version != FRAME_VERSION or count == 0 or count > self.max_samples:
                del buf[:1]
                continue
            if len(buf) < frame_len:
                if not final:
                    return events
                del buf[:1]
                continue
            body = bytes(buf[2 : frame_len - 2])
            (crc,) = struct.unpack_from("<H", buf, frame_len - 2)
            if crc16_ccitt_false(body) != crc:
                del buf[:1]
                continue
            samples = np.frombuffer(body[_FRAME_HEADER.size :], dtype="<i2").copy()
            if self._last_seq is not None:
                expected = (self._last_seq + 1) & 0xFFFFFFFF
                if seq != expected:
                    events.append(
                        GapReport(
                            after_seq=self._last_seq,
                            next_seq=seq,
                            missing=(seq - expected) & 0xFFFFFFFF,
                        )
                    )
            self._last_seq = seq
            events.append(ChunkFrame(seq=seq, samples=samples))
            del buf[:frame_len]


def frame_decode_stream(source, max_samples: int = 1 << 20) -> Iterator[Union[ChunkFrame, GapReport]]:
    """Decode a byte stream (file-like or bytes) into frames and gap reports."""
    decoder = FrameDecoder(max_samples=max_samples)
    if isinstance(source, (bytes, bytearray)):
        yield from decoder.feed(bytes(source))
    else:
        while True:
            chunk = source.read(65536)
            if not chunk:
                break
            yield from decoder.feed(chunk)
    yield from decoder.finalize()


def link_budget(
    sample_rate_hz: float,
    bits_per_sample: int,
    baud: float,
    framing: SerialFraming = SerialFraming(),
) -> LinkBudget:
    """Compare the capture data rate against the serial payload rate."""
    if sample_rate_hz <= 0 or baud <= 0:
        raise ValueError("sample_rate_hz and baud must be positive")
    if bits_per_sample <= 0:
        raise ValueError("bits_per_sample must be positive")
    line_bits = framing.data_bits + framing.stop_bits + framing.parity_bits + 1
    link_rate = baud * framing.data_bits / line_bits / 8.0
    capture_rate = sample_rate_hz * bits_per_sample / 8.0
    duty = link_rate / capture_rate
    return LinkBudget(
        capture_rate_Bps=capture_rate,
        link_rate_Bps=link_rate,
        duty_cycle=duty,
        lossless_continuous=link_rate >= capture_rate,
    )


def csv_export(reports: Iterable[RmsReport], sink) -> None:
    """Write reports as `t_s,rms` rows with 6 decimal places and LF endings."""
    sink.write("t_s,rms\n")
    for report in reports:
        sink.write(f"{report.t_end_s:.6f},{report.rms:.6f}\n")


def csv_import(source) -> list:
    """Read a `t_s,rms` CSV back into RmsReport values.

    Window lengths are not stored in the CSV, so n_samples is set to 1.
    """
    header = source.readline().strip()
    if header != "t_s,rms":
        raise ValueError(f"expected header 't_s,rms', got {header!r}")
    reports = []
    for line in source:
        line = line.strip()
        if not line:
            continue
        t_s, value = line.split(",")
        reports.append(RmsReport(t_end_s=float(t_s), rms=float(value), n_samples=1))
    return reports
