import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcidisfluency.audio_io import AudioSignal
from mcidisfluency.segmentation import (
    Label, Segment, SegmentList, VadConfig, read_segments_csv, split_streams, vad,
    write_segments_csv,
)
from signals import RATE, sine, three_segment

HOP = 220  # samples per 10 ms hop at the canonical rate


def test_silence_is_one_disfluency_segment():
    x = 1e-5 * np.random.default_rng(1).standard_normal(RATE)
    segs = vad(AudioSignal(x, RATE))
    assert len(segs) == 1
    assert segs[0] == Segment(0, RATE, Label.DISFLUENCY)


def test_digital_zeros_are_disfluency():
    segs = vad(AudioSignal(np.zeros(RATE), RATE))
    assert [s.label for s in segs] == [Label.DISFLUENCY]


def test_full_scale_sine_is_one_speech_segment():
    segs = vad(sine(220, 1.0))
    assert len(segs) == 1
    assert segs[0] == Segment(0, RATE, Label.SPEECH)


def test_three_segment_boundaries():
    sig = three_segment()
    segs = vad(sig)
    assert [s.label for s in segs] == [Label.DISFLUENCY, Label.SPEECH, Label.DISFLUENCY]
    sp = segs.of(Label.SPEECH)[0]
    assert abs(sp.start - 0.5 * RATE) <= 2 * HOP
    assert abs(sp.end - 1.5 * RATE) <= 2 * HOP


def test_split_streams_three_segment():
    sig = three_segment()
    speech, disfl = split_streams(sig, vad(sig))
    assert abs(len(speech) - RATE) <= 4 * HOP
    assert len(speech) + len(disfl) == len(sig)


def test_split_single_speech_segment():
    sig = sine(220, 0.5)
    segs = SegmentList([Segment(0, len(sig), Label.SPEECH)])
    speech, disfl = split_streams(sig, segs)
    assert np.array_equal(speech.samples, sig.samples)
    assert len(disfl) == 0


def test_split_alternating_segments_halves():
    n = 8000
    sig = AudioSignal(np.arange(n, dtype=float), RATE)
    segs = SegmentList([Segment(i * 1000, (i + 1) * 1000,
                                Label.SPEECH if i % 2 == 0 else Label.DISFLUENCY)
                        for i in range(8)])
    speech, disfl = split_streams(sig, segs)
    assert len(speech) == len(disfl) == n // 2
    assert speech.samples[1000] == 2000.0


def test_shorter_than_a_frame_is_an_error():
    with pytest.raises(ValueError):
        vad(AudioSignal(np.zeros(300), RATE))


def test_config_must_be_positive():
    with pytest.raises(ValueError):
        VadConfig(hangover_frames=0)
    with pytest.raises(ValueError):
        VadConfig(zcr_threshold=-1)


def test_segment_list_validation():
    with pytest.raises(ValueError):
        Segment(5, 5, Label.SPEECH)
    bad = SegmentList([Segment(0, 10, Label.SPEECH), Segment(10, 20, Label.SPEECH)])
    with pytest.raises(ValueError):
        bad.validate(20)
    gap = SegmentList([Segment(0, 10, Label.SPEECH), Segment(12, 20, Label.DISFLUENCY)])
    with pytest.raises(ValueError):
        gap.validate(20)


def test_segments_csv_roundtrip(tmp_path):
    sig = three_segment()
    segs = vad(sig)
    p = tmp_path / "s.csv"
    write_segments_csv(p, segs, RATE, {"config": "abc"})
    text = p.read_text().splitlines()
    assert text[0] == "# config=abc"
    assert text[1] == "start_s,end_s,label"
    assert text[2].split(",")[0] == "0.000000"
    back = read_segments_csv(p, RATE)
    assert [(s.start, s.end, s.label) for s in back] == [(s.start, s.end, s.label) for s in segs]


def _bursty(seed):
    rng = np.random.default_rng(seed)
    parts = []
    for _ in range(rng.integers(2, 6)):
        n = int(rng.integers(2000, 9000))
        if rng.random() < 0.5:
            parts.append(0.3 * np.sin(2 * np.pi * rng.uniform(100, 400) * np.arange(n) / RATE))
        else:
            parts.append(np.zeros(n))
    x = np.concatenate(parts)
    return x + 1e-4 * rng.standard_normal(x.size)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_segments_partition_and_streams_sum(seed):
    x = _bursty(seed)
    sig = AudioSignal(x, RATE)
    segs = vad(sig)
    segs.validate(len(x))
    assert segs[0].start == 0 and segs[-1].end == len(x)
    for a, b in zip(segs, list(segs)[1:]):
        assert a.end == b.start and a.label != b.label
    speech, disfl = split_streams(sig, segs)
    assert len(speech) + len(disfl) == len(x)
    assert vad(sig) == segs


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.01, 20.0))
def test_gain_never_removes_speech(seed, gain):
    x = _bursty(seed)
    base = np.zeros(len(x), dtype=bool)
    loud = np.zeros(len(x), dtype=bool)
    for s in vad(AudioSignal(x, RATE)).of(Label.SPEECH):
        base[s.start:s.end] = True
    for s in vad(AudioSignal(gain * x, RATE)).of(Label.SPEECH):
        loud[s.start:s.end] = True
    assert not np.any(base & ~loud)
