"""Loading, resampling and framing of mono PCM recordings."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CANONICAL_RATE = 22050


class AudioError(Exception):
    """Base class for audio input problems."""


class UnreadableAudioError(AudioError):
    pass


class UnsupportedEncodingError(AudioError):
    pass


class EmptyAudioError(AudioError):
    pass


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (n_frames, frame_len)
    frame_len: int
    hop: int
    offsets: np.ndarray
    sample_rate: int

    def __len__(self):
        return self.frames.shape[0]

    @property
    def centers(self) -> np.ndarray:
        """Frame centre times in seconds."""
        return (self.offsets + self.frame_len / 2.0) / self.sample_rate


def read_wav(path) -> AudioSignal:
    """Read a 16-bit PCM WAV file, averaging stereo down to mono.

    Integer codes are scaled by 1/32768 so the full-scale negative code maps
    to exactly -1.0.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        if "unknown format" in str(exc):
            raise UnsupportedEncodingError(f"{path}: {exc}") from exc
        raise UnreadableAudioError(f"{path}: {exc}") from exc
    except (OSError, EOFError) as exc:
        raise UnreadableAudioError(f"{path}: {exc}") from exc

    if width != 2:
        raise UnsupportedEncodingError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if n_channels not in (1, 2):
        raise UnsupportedEncodingError(f"{path}: {n_channels} channels not supported")
    codes = np.frombuffer(raw, dtype="<i2")
    if codes.size == 0:
        raise EmptyAudioError(f"{path}: no audio frames")
    x = codes.astype(np.float64).reshape(-1, n_channels) / 32768.0
    return AudioSignal(x.mean(axis=1), rate)


def write_wav(path, sig: AudioSignal) -> None:
    """Write a mono 16-bit PCM WAV; samples are clipped to the int16 range."""
    codes = np.clip(np.round(sig.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sig.sample_rate))
        wf.writeframes(codes.tobytes())


def resample(sig: AudioSignal, target_rate: int) -> AudioSignal:
    """Linear-interpolation resampling to ``target_rate``."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == sig.sample_rate:
        return sig
    n_out = max(1, int(round(len(sig) * target_rate / sig.sample_rate)))
    src_pos = np.arange(n_out) * (sig.sample_rate / target_rate)
    out = np.interp(src_pos, np.arange(len(sig)), sig.samples)
    return AudioSignal(out, int(target_rate))


def load(path, rate: int = CANONICAL_RATE) -> AudioSignal:
    """Read a WAV file and bring it to the canonical analysis rate."""
    return resample(read_wav(path), rate)


def frame_params(sample_rate: int, frame_ms: float, hop_ms: float) -> tuple[int, int]:
    if not 0 < hop_ms <= frame_ms:
        raise ValueError(f"need 0 < hop_ms <= frame_ms, got {hop_ms}, {frame_ms}")
    frame_len = int(frame_ms * sample_rate / 1000.0)
    hop = int(hop_ms * sample_rate / 1000.0)
    if hop < 1:
        raise ValueError("hop shorter than one sample")
    return frame_len, hop


def n_frames_for(n_samples: int, frame_len: int, hop: int) -> int:
    return -(-max(0, n_samples - frame_len) // hop) + 1


def frame(sig: AudioSignal, frame_ms: float = 25.0, hop_ms: float = 10.0) -> FrameSequence:
    """Cut ``sig`` into overlapping frames; the last frame is zero-padded."""
    frame_len, hop = frame_params(sig.sample_rate, frame_ms, hop_ms)
    return frame_samples(sig.samples, sig.sample_rate, frame_len, hop)


def frame_samples(x: np.ndarray, sample_rate: int, frame_len: int, hop: int) -> FrameSequence:
    n = x.shape[0]
    if n < hop:
        raise ValueError(f"signal of {n} samples is shorter than one hop ({hop})")
    count = n_frames_for(n, frame_len, hop)
    padded_len = (count - 1) * hop + frame_len
    padded = np.zeros(padded_len)
    padded[:n] = x
    idx = np.arange(count)[:, None] * hop + np.arange(frame_len)[None, :]
    return FrameSequence(
        frames=padded[idx],
        frame_len=frame_len,
        hop=hop,
        offsets=np.arange(count) * hop,
        sample_rate=sample_rate,
    )
