import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcidisfluency.audio_io import (
    AudioSignal, EmptyAudioError, UnreadableAudioError, UnsupportedEncodingError,
    frame, frame_params, frame_samples, load, n_frames_for, read_wav, resample, write_wav,
)
from signals import RATE, sine


def _write_raw(path, codes, channels=1, width=2, rate=RATE):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(width)
        wf.setframerate(rate)
        wf.writeframes(np.asarray(codes).astype(f"<i{width}").tobytes())


def test_silence_reads_as_zeros(tmp_path):
    p = tmp_path / "s.wav"
    _write_raw(p, np.zeros(RATE, dtype=np.int16))
    sig = read_wav(p)
    assert sig.sample_rate == RATE
    assert len(sig) == RATE
    assert np.all(sig.samples == 0.0)


def test_stereo_opposite_channels_average_to_zero(tmp_path):
    p = tmp_path / "st.wav"
    codes = np.tile([16384, -16384], 1000)
    _write_raw(p, codes, channels=2)
    sig = read_wav(p)
    assert len(sig) == 1000
    assert np.all(sig.samples == 0.0)


def test_most_negative_code_is_minus_one(tmp_path):
    p = tmp_path / "m.wav"
    _write_raw(p, [-32768, 0, 32767])
    assert read_wav(p).samples[0] == -1.0


def test_error_kinds(tmp_path):
    with pytest.raises(UnreadableAudioError):
        read_wav(tmp_path / "missing.wav")
    junk = tmp_path / "junk.wav"
    junk.write_bytes(b"not a wave file at all")
    with pytest.raises(UnreadableAudioError):
        read_wav(junk)
    p8 = tmp_path / "p8.wav"
    with wave.open(str(p8), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(1)
        wf.setframerate(8000)
        wf.writeframes(bytes(100))
    with pytest.raises(UnsupportedEncodingError):
        read_wav(p8)
    empty = tmp_path / "e.wav"
    _write_raw(empty, np.zeros(0, dtype=np.int16))
    with pytest.raises(EmptyAudioError):
        read_wav(empty)
    assert issubclass(EmptyAudioError, Exception)
    assert len({UnreadableAudioError, UnsupportedEncodingError, EmptyAudioError}) == 3


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_write_read_roundtrip_within_quantization(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.99, 0.99, 500)
    p = tmp_path_factory.mktemp("rt") / "x.wav"
    write_wav(p, AudioSignal(x, 16000))
    back = read_wav(p)
    assert back.sample_rate == 16000
    assert np.max(np.abs(back.samples - x)) <= 1 / 32768


def test_resample_identity_and_constant():
    sig = sine(220, 0.2)
    assert resample(sig, RATE) is sig
    c = AudioSignal(np.full(1000, 0.3), 44100)
    out = resample(c, 22050)
    assert np.allclose(out.samples, 0.3, atol=1e-15)
    assert out.sample_rate == 22050


def test_resample_keeps_tone_frequency():
    sig = sine(220, 1.0, rate=44100)
    out = resample(sig, 22050)
    spec = np.abs(np.fft.rfft(out.samples))
    freqs = np.fft.rfftfreq(len(out), 1 / 22050)
    assert abs(freqs[np.argmax(spec)] - 220) <= freqs[1]
    assert abs(out.duration - sig.duration) <= 1 / 22050


def test_load_resamples_to_canonical(tmp_path):
    p = tmp_path / "a.wav"
    write_wav(p, sine(220, 0.5, rate=16000, amp=0.5))
    sig = load(p)
    assert sig.sample_rate == RATE
    assert abs(len(sig) - RATE // 2) <= 1


def test_frame_params_at_canonical_rate():
    assert frame_params(RATE, 25, 10) == (551, 220)
    with pytest.raises(ValueError):
        frame_params(RATE, 10, 25)


def test_frame_counts():
    # exactly one frame when N equals the frame length
    x = AudioSignal(np.ones(551), RATE)
    assert len(frame(x)) == 1
    # ceil((22050 - 551) / 220) + 1 = ceil(97.72) + 1 = 99
    fs = frame(AudioSignal(np.ones(RATE), RATE))
    assert len(fs) == 99
    assert fs.frames.shape == (99, 551)


def test_last_frame_zero_padded():
    x = np.ones(1000)
    fs = frame_samples(x, RATE, 551, 220)
    last = fs.frames[-1]
    covered = 1000 - fs.offsets[-1]
    assert covered < 551
    assert last[covered:].sum() == 0.0
    assert np.all(last[:covered] == 1.0)


def test_shorter_than_hop_is_an_error():
    with pytest.raises(ValueError):
        frame(AudioSignal(np.ones(100), RATE))


@settings(max_examples=50, deadline=None)
@given(st.integers(300, 5000), st.integers(0, 2**32 - 1))
def test_overlap_add_of_hop_slices_reconstructs(n, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    fs = frame_samples(x, RATE, 551, 220)
    assert len(fs) == n_frames_for(n, 551, 220)
    rebuilt = np.zeros(fs.offsets[-1] + 551)
    for off, fr in zip(fs.offsets, fs.frames):
        rebuilt[off:off + 220] = fr[:220]
    rebuilt[fs.offsets[-1]:] = fs.frames[-1]
    assert np.array_equal(rebuilt[:n], x)
