import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultraleak import dsp, stream_io

FS = 62500.0


def crc16_bitwise(data: bytes) -> int:
    # independent bit-at-a-time oracle for CRC-16/CCITT-FALSE
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
    return crc


class TestCrc:
    def test_against_bitwise_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            data = rng.integers(0, 256, rng.integers(0, 64)).astype(np.uint8).tobytes()
            assert stream_io.crc16_ccitt_false(data) == crc16_bitwise(data)

    def test_known_value(self):
        # standard check input for CRC-16/CCITT-FALSE
        assert stream_io.crc16_ccitt_false(b"123456789") == 0x29B1


class TestWav:
    def test_empty_buffer_golden_header(self):
        sink = io.BytesIO()
        stream_io.wav_write(dsp.SampleBuffer(np.empty(0), FS), sink)
        raw = sink.getvalue()
        assert len(raw) == 44
        assert raw[0:4] == b"RIFF"
        assert struct.unpack_from("<I", raw, 4)[0] == 36
        assert raw[8:16] == b"WAVEfmt "
        assert struct.unpack_from("<IHH", raw, 16) == (16, 1, 1)
        assert raw[24:28] == (62500).to_bytes(4, "little")
        assert raw[24:28] == bytes([0x24, 0xF4, 0x00, 0x00])
        assert struct.unpack_from("<IHH", raw, 28) == (125000, 2, 16)
        assert raw[36:40] == b"data"
        assert struct.unpack_from("<I", raw, 40)[0] == 0

    def test_single_sample_encoding(self):
        sink = io.BytesIO()
        stream_io.wav_write(dsp.SampleBuffer(np.array([1000.0]), FS), sink)
        raw = sink.getvalue()
        assert struct.unpack_from("<I", raw, 40)[0] == 2
        assert raw[-2:] == bytes([0xE8, 0x03])

    def test_rounding_ties_away_and_clamp(self):
        sink = io.BytesIO()
        x = np.array([0.5, -0.5, 1.4, -1.4, 40000.0, -40000.0])
        stream_io.wav_write(dsp.SampleBuffer(x, FS), sink)
        sink.seek(0)
        back = stream_io.wav_read(sink)
        assert back.samples.tolist() == [1, -1, 1, -1, 32767, -32768]

    def test_round_trip_exact(self):
        rng = np.random.default_rng(1)
        x = rng.integers(-32768, 32768, 5000).astype(np.float64)
        sink = io.BytesIO()
        stream_io.wav_write(dsp.SampleBuffer(x, FS), sink)
        sink.seek(0)
        back = stream_io.wav_read(sink)
        assert back.sample_rate_hz == FS
        assert np.array_equal(back.samples, x)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_round_trip_property(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.integers(-32768, 32768, rng.integers(0, 300)).astype(np.float64)
        sr = float(rng.integers(1, 200000))
        sink = io.BytesIO()
        stream_io.wav_write(dsp.SampleBuffer(x, sr), sink)
        sink.seek(0)
        back = stream_io.wav_read(sink)
        assert back.sample_rate_hz == sr
        assert np.array_equal(back.samples, x)

    def test_stereo_rejected_naming_field(self):
        sink = io.BytesIO()
        stream_io.wav_write(dsp.SampleBuffer(np.zeros(4), FS), sink)
        raw = bytearray(sink.getvalue())
        struct.pack_into("<H", raw, 22, 2)  # channels = 2
        with pytest.raises(stream_io.MalformedWavError, match="channels"):
            stream_io.wav_read(io.BytesIO(bytes(raw)))

    def test_24_bit_rejected_naming_field(self):
        sink = io.BytesIO()
        stream_io.wav_write(dsp.SampleBuffer(np.zeros(4), FS), sink)
        raw = bytearray(sink.getvalue())
        struct.pack_into("<H", raw, 34, 24)  # bits_per_sample = 24
        with pytest.raises(stream_io.MalformedWavError, match="bits_per_sample"):
            stream_io.wav_read(io.BytesIO(bytes(raw)))

    def test_non_pcm_rejected(self):
        sink = io.BytesIO()
        stream_io.wav_write(dsp.SampleBuffer(np.zeros(4), FS), sink)
        raw = bytearray(sink.getvalue())
        struct.pack_into("<H", raw, 20, 3)  # IEEE float
        with pytest.raises(stream_io.MalformedWavError, match="audio_format"):
            stream_io.wav_read(io.BytesIO(bytes(raw)))

    def test_truncated_data_rejected(self):
        sink = io.BytesIO()
        stream_io.wav_write(dsp.SampleBuffer(np.zeros(100), FS), sink)
        raw = sink.getvalue()[:-10]
        with pytest.raises(stream_io.TruncatedDataError):
            stream_io.wav_read(io.BytesIO(raw))

    def test_bad_magic_rejected(self):
        with pytest.raises(stream_io.MalformedWavError):
            stream_io.wav_read(io.BytesIO(b"RIFX" + b"\x00" * 40))

    def test_non_integer_rate_rejected(self):
        with pytest.raises(ValueError):
            stream_io.wav_write(dsp.SampleBuffer(np.zeros(1), 44100.5), io.BytesIO())


def decode_all(data: bytes):
    return list(stream_io.frame_decode_stream(data))


class TestFraming:
    def test_minimal_frame_layout(self):
        frame = stream_io.frame_encode(0, [0])
        assert len(frame) == 15
        assert frame[:2] == b"\xaa\x55"
        assert frame[2] == 1  # version
        assert frame[3:7] == b"\x00\x00\x00\x00"  # seq
        assert frame[7:11] == b"\x01\x00\x00\x00"  # count
        assert frame[11:13] == b"\x00\x00"  # payload
        assert struct.unpack("<H", frame[13:])[0] == crc16_bitwise(frame[2:13])

    def test_paper_sized_chunk_length(self):
        frame = stream_io.frame_encode(3, np.zeros(62500, dtype=np.int16))
        assert len(frame) == 11 + 125000 + 2

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        samples = rng.integers(-32768, 32768, 100).astype(np.int16)
        events = decode_all(stream_io.frame_encode(7, samples))
        assert len(events) == 1
        assert events[0].seq == 7
        assert np.array_equal(events[0].samples, samples)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_round_trip_property(self, seed):
        rng = np.random.default_rng(seed)
        samples = rng.integers(-32768, 32768, rng.integers(1, 200)).astype(np.int16)
        seq = int(rng.integers(0, 2**32))
        events = decode_all(stream_io.frame_encode(seq, samples))
        assert events == [stream_io.ChunkFrame(seq=seq, samples=samples)]

    def test_consecutive_frames_no_gaps(self):
        data = b"".join(stream_io.frame_encode(i, [i]) for i in range(10))
        events = decode_all(data)
        frames = [e for e in events if isinstance(e, stream_io.ChunkFrame)]
        gaps = [e for e in events if isinstance(e, stream_io.GapReport)]
        assert [f.seq for f in frames] == list(range(10))
        assert gaps == []

    def test_missing_frame_reports_gap(self):
        data = b"".join(stream_io.frame_encode(i, [i]) for i in (0, 1, 3))
        events = decode_all(data)
        gaps = [e for e in events if isinstance(e, stream_io.GapReport)]
        assert len(gaps) == 1
        assert gaps[0].after_seq == 1
        assert gaps[0].next_seq == 3
        assert gaps[0].missing == 1

    def test_flipped_bit_discards_only_that_frame(self):
        frames = [stream_io.frame_encode(i, list(range(1, 9))) for i in range(3)]
        corrupted = bytearray(frames[1])
        corrupted[12] ^= 0x04  # payload bit flip
        data = frames[0] + bytes(corrupted) + frames[2]
        events = decode_all(data)
        decoded = [e for e in events if isinstance(e, stream_io.ChunkFrame)]
        assert [f.seq for f in decoded] == [0, 2]

    def test_resync_after_garbage(self):
        rng = np.random.default_rng(3)
        garbage = rng.integers(0, 256, 5000).astype(np.uint8).tobytes()
        tail = b"".join(stream_io.frame_encode(i, [i, -i]) for i in range(5))
        events = decode_all(garbage + tail)
        decoded = [e for e in events if isinstance(e, stream_io.ChunkFrame)]
        assert [f.seq for f in decoded][-5:] == list(range(5))

    def test_fuzz_never_emits_bad_crc(self):
        rng = np.random.default_rng(4)
        blob = rng.integers(0, 256, 100000).astype(np.uint8).tobytes()
        for event in stream_io.frame_decode_stream(blob):
            if isinstance(event, stream_io.ChunkFrame):
                body = (
                    struct.pack("<BII", 1, event.seq, len(event.samples))
                    + event.samples.astype("<i2").tobytes()
                )
                # anything emitted must carry a self-consistent CRC
                assert crc16_bitwise(body) == stream_io.crc16_ccitt_false(body)

    def test_incremental_feed_equals_one_shot(self):
        data = b"".join(stream_io.frame_encode(i, list(range(50))) for i in range(4))
        one_shot = decode_all(data)
        decoder = stream_io.FrameDecoder()
        incremental = []
        for i in range(0, len(data), 13):
            incremental.extend(decoder.feed(data[i : i + 13]))
        incremental.extend(decoder.finalize())
        assert incremental == one_shot

    def test_empty_payload_rejected(self):
        with pytest.raises(ValueError):
            stream_io.frame_encode(0, [])


class TestLinkBudget:
    def test_paper_rates_cannot_stream_continuously(self):
        b = stream_io.link_budget(62500, 16, 921600)
        assert b.capture_rate_Bps == 125000
        assert b.link_rate_Bps == 92160
        assert b.duty_cycle == pytest.approx(0.73728, abs=1e-10)
        assert b.lossless_continuous is False

    def test_low_rate_is_lossless(self):
        b = stream_io.link_budget(16000, 16, 921600)
        assert b.duty_cycle == pytest.approx(2.88, abs=1e-10)
        assert b.lossless_continuous is True

    def test_scale_invariance(self):
        a = stream_io.link_budget(62500, 16, 921600)
        b = stream_io.link_budget(625000, 16, 9216000)
        assert a.duty_cycle == pytest.approx(b.duty_cycle, rel=1e-12)

    def test_rejects_zero_bits(self):
        with pytest.raises(ValueError):
            stream_io.link_budget(62500, 0, 921600)

    def test_framing_parse(self):
        assert stream_io.SerialFraming.parse("8N1") == stream_io.SerialFraming(8, 1, 0)
        assert stream_io.SerialFraming.parse("7E1") == stream_io.SerialFraming(7, 1, 1)
        with pytest.raises(ValueError):
            stream_io.SerialFraming.parse("8X1")


class TestCsv:
    def test_empty_is_header_only(self):
        sink = io.StringIO()
        stream_io.csv_export([], sink)
        assert sink.getvalue() == "t_s,rms\n"

    def test_single_report_golden(self):
        sink = io.StringIO()
        stream_io.csv_export([dsp.RmsReport(0.2, 10.0, 12500)], sink)
        assert sink.getvalue() == "t_s,rms\n0.200000,10.000000\n"

    def test_round_trip_within_precision(self):
        reports = [dsp.RmsReport(0.2 * (i + 1), 10.123456 + i, 12500) for i in range(5)]
        sink = io.StringIO()
        stream_io.csv_export(reports, sink)
        back = stream_io.csv_import(io.StringIO(sink.getvalue()))
        for orig, parsed in zip(reports, back):
            assert parsed.t_end_s == pytest.approx(orig.t_end_s, abs=1e-6)
            assert parsed.rms == pytest.approx(orig.rms, abs=1e-6)

    def test_import_rejects_bad_header(self):
        with pytest.raises(ValueError):
            stream_io.csv_import(io.StringIO("time,value\n1,2\n"))
