"""Cepstral coefficient tracks: MFCC, LPCC, PLP, and their regression deltas."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct

from .audio_io import FrameSequence
from .lpc import LOG_FLOOR, LevinsonError, autocorr, floor_cepstrum, levinson, lpc_to_cepstrum

PRE_EMPHASIS = 0.97


@dataclass(frozen=True)
class CoeffTrack:
    values: np.ndarray  # (n_frames, n_coeffs)
    family: str
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.names:
            object.__setattr__(self, "names", [f"c{i}" for i in range(self.values.shape[1])])

    @property
    def n_coeffs(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.values.shape[0]


def _nfft(n: int) -> int:
    return 1 << int(np.ceil(np.log2(n)))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, rate: int) -> np.ndarray:
    """Triangular filters equally spaced in mel between 0 Hz and Nyquist."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(rate / 2.0), n_mels + 2))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / rate)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(up, down))


def pre_emphasize(frames: np.ndarray, alpha: float = PRE_EMPHASIS) -> np.ndarray:
    out = frames.copy()
    out[:, 1:] -= alpha * frames[:, :-1]
    return out


def mfcc(frames: FrameSequence, rate: int | None = None, n_mels: int = 26,
         n_coeffs: int = 13) -> CoeffTrack:
    rate = rate or frames.sample_rate
    if n_coeffs > n_mels:
        raise ValueError("n_coeffs must not exceed n_mels")
    n = frames.frame_len
    nfft = _nfft(n)
    x = pre_emphasize(frames.frames) * np.hanning(n)
    power = np.abs(np.fft.rfft(x, nfft, axis=1)) ** 2
    fb = mel_filterbank(n_mels, nfft, rate)
    logmel = np.log(np.maximum(power @ fb.T, LOG_FLOOR))
    c = dct(logmel, type=2, norm="ortho", axis=1)[:, :n_coeffs]
    return CoeffTrack(c, "mfcc")


def lpcc(frames: FrameSequence, lpc_order: int = 12, n_coeffs: int = 13) -> CoeffTrack:
    """LPC cepstra of Hamming-windowed frames.

    Silent or numerically unstable frames get the floor row
    ``[ln(1e-10), 0, ...]``, matching the MFCC silence policy.
    """
    if n_coeffs < lpc_order:
        raise ValueError("n_coeffs must be at least lpc_order")
    window = np.hamming(frames.frame_len)
    r_all = autocorr(frames.frames * window, lpc_order)
    out = np.empty((len(frames), n_coeffs))
    for i, r in enumerate(r_all):
        out[i] = _cepstrum_or_floor(r, lpc_order, n_coeffs)
    return CoeffTrack(out, "lpcc")


def _cepstrum_or_floor(r, order, n_coeffs):
    if r[0] <= LOG_FLOOR:
        return floor_cepstrum(n_coeffs)
    try:
        a, err = levinson(r, order)
    except LevinsonError:
        return floor_cepstrum(n_coeffs)
    return lpc_to_cepstrum(a, err, n_coeffs)


def hz_to_bark(f):
    return 6.0 * np.arcsinh(np.asarray(f) / 600.0)


def bark_filterbank(n_fft: int, rate: int) -> tuple[np.ndarray, np.ndarray]:
    """Critical-band masking curves spaced one Bark apart, plus centre frequencies."""
    nyq_bark = hz_to_bark(rate / 2.0)
    n_bands = int(np.ceil(nyq_bark)) + 1
    centres = np.linspace(0.0, nyq_bark, n_bands)
    z = hz_to_bark(np.fft.rfftfreq(n_fft, 1.0 / rate))
    d = z[None, :] - centres[:, None]
    fb = np.zeros_like(d)
    m = (d >= -1.3) & (d < -0.5)
    fb[m] = 10.0 ** (2.5 * (d[m] + 0.5))
    fb[(d >= -0.5) & (d <= 0.5)] = 1.0
    m = (d > 0.5) & (d <= 2.5)
    fb[m] = 10.0 ** (-1.0 * (d[m] - 0.5))
    centre_hz = 600.0 * np.sinh(centres / 6.0)
    return fb, centre_hz


def equal_loudness(f_hz) -> np.ndarray:
    w2 = (2.0 * np.pi * np.asarray(f_hz)) ** 2
    return ((w2 + 56.8e6) * w2 ** 2) / ((w2 + 6.3e6) ** 2 * (w2 + 0.38e9))


def plp(frames: FrameSequence, rate: int | None = None, model_order: int = 12,
        n_coeffs: int | None = None) -> CoeffTrack:
    """Perceptual linear prediction cepstra.

    Bark critical-band integration, equal-loudness weighting and cube-root
    compression of the power spectrum, then an all-pole fit to the
    resulting auditory spectrum. Band energies are floored at 1e-10, so a
    silent frame yields the flat-spectrum row (only c0 non-zero).
    """
    rate = rate or frames.sample_rate
    n_coeffs = n_coeffs or model_order + 1
    n = frames.frame_len
    nfft = _nfft(n)
    power = np.abs(np.fft.rfft(frames.frames * np.hamming(n), nfft, axis=1)) ** 2
    fb, centres = bark_filterbank(nfft, rate)
    bands = np.maximum(power @ fb.T, LOG_FLOOR) * equal_loudness(centres)
    # edge bands are unreliable after weighting; copy their neighbours
    bands[:, 0] = bands[:, 1]
    bands[:, -1] = bands[:, -2]
    loud = np.cbrt(bands)
    r_all = np.fft.irfft(loud, axis=1)[:, : model_order + 1]
    out = np.empty((len(frames), n_coeffs))
    for i, r in enumerate(r_all):
        out[i] = _cepstrum_or_floor(r, model_order, n_coeffs)
    return CoeffTrack(out, "plp")


def deltas(track: CoeffTrack, width: int = 2) -> tuple[CoeffTrack, CoeffTrack]:
    """First and second order regression coefficients with edge replication."""
    d1 = _regress(track.values, width)
    d2 = _regress(d1, width)
    return (
        CoeffTrack(d1, "delta", [f"d_{n}" for n in track.names]),
        CoeffTrack(d2, "deltadelta", [f"dd_{n}" for n in track.names]),
    )


def _regress(c: np.ndarray, width: int) -> np.ndarray:
    t = c.shape[0]
    padded = np.concatenate([np.repeat(c[:1], width, 0), c, np.repeat(c[-1:], width, 0)])
    denom = 2.0 * sum(k * k for k in range(1, width + 1))
    out = np.zeros_like(c, dtype=np.float64)
    for k in range(1, width + 1):
        out += k * (padded[width + k:width + k + t] - padded[width - k:width - k + t])
    return out / denom
