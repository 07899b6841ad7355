"""Classical acoustic descriptors.

Frame-level energy, intensity, zero-crossing rate and spectral centroid;
autocorrelation pitch; jitter/shimmer/APQ from f0-guided period marks;
autocorrelation HNR; LPC formants; voicing and pause statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioSignal, FrameSequence
from .lpc import LevinsonError, autocorr, levinson
from .segmentation import Label, SegmentList

EPS = 1e-12
OCTAVE_COST = 0.01
R_CLAMP = 1e-6


@dataclass(frozen=True)
class PitchTrack:
    f0: np.ndarray  # Hz, 0.0 = unvoiced
    times: np.ndarray  # frame centres, seconds
    strength: np.ndarray  # peak normalized autocorrelation per frame

    @property
    def voiced(self) -> np.ndarray:
        return self.f0 > 0

    def __len__(self):
        return self.f0.shape[0]


@dataclass(frozen=True)
class FormantTrack:
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    frame_index: np.ndarray  # which input frames produced a row

    def __len__(self):
        return self.f1.shape[0]


def frame_descriptors(frame: np.ndarray, rate: int) -> dict[str, float]:
    """Energy, intensity (dB), zero-crossing rate and spectral centroid of one frame."""
    tracks = descriptor_tracks(np.asarray(frame, dtype=np.float64)[None, :], rate)
    return {k: float(v[0]) for k, v in tracks.items()}


def descriptor_tracks(frames: np.ndarray, rate: int) -> dict[str, np.ndarray]:
    """:func:`frame_descriptors` vectorised over a ``(n_frames, frame_len)`` array."""
    n = frames.shape[1]
    if n < 2:
        raise ValueError("frame length must be at least 2")
    energy = np.mean(frames ** 2, axis=1)
    signs = np.signbit(frames)
    zcr = np.count_nonzero(signs[:, 1:] != signs[:, :-1], axis=1) / (n - 1)
    mag = np.abs(np.fft.rfft(frames * np.hanning(n), axis=1))
    freqs = np.fft.rfftfreq(n, 1.0 / rate)
    total = mag.sum(axis=1)
    centroid = np.divide(mag @ freqs, total, out=np.zeros_like(total), where=total > 0)
    return {
        "short_time_energy": energy,
        "intensity_db": 10.0 * np.log10(energy + EPS),
        "zcr": zcr,
        "spectral_centroid": centroid,
    }


def normalized_xcorr(frames: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized cross-correlation between each frame and its lagged self.

    Entry ``[i, t]`` correlates ``x[0:N-t]`` with ``x[t:N]``, which equals one
    for any signal that repeats exactly with period ``t``.
    """
    frames = np.atleast_2d(frames)
    n = frames.shape[1]
    r = autocorr(frames, max_lag)
    cs = np.cumsum(frames ** 2, axis=1)
    lags = np.arange(max_lag + 1)
    head = cs[:, n - 1 - lags]
    tail = cs[:, [n - 1]] - np.concatenate([np.zeros((frames.shape[0], 1)), cs[:, lags[1:] - 1]], axis=1)
    denom = np.sqrt(head * tail)
    return np.divide(r, denom, out=np.zeros_like(r), where=denom > EPS * EPS)


def _parabolic(ym1, y0, yp1):
    denom = ym1 - 2.0 * y0 + yp1
    if denom >= 0:
        return 0.0, y0
    shift = 0.5 * (ym1 - yp1) / denom
    return shift, y0 - 0.25 * (ym1 - yp1) * shift


def pitch_track(frames: FrameSequence, rate: int | None = None, f0_min: float = 60.0,
                f0_max: float = 400.0, voicing_threshold: float = 0.45) -> PitchTrack:
    """Autocorrelation pitch estimate per frame.

    Candidate lags are local maxima of the normalized autocorrelation in
    ``[rate/f0_max, rate/f0_min]``; a small per-octave cost favours the
    shortest period among near-equal peaks. Frames whose interpolated peak
    falls below ``voicing_threshold`` are unvoiced (f0 = 0).
    """
    rate = rate or frames.sample_rate
    if not 0 < f0_min < f0_max <= rate / 4:
        raise ValueError(f"need 0 < f0_min < f0_max <= rate/4, got {f0_min}, {f0_max}")
    lag_lo = max(2, int(np.floor(rate / f0_max)))
    lag_hi = int(np.ceil(rate / f0_min))
    if lag_hi + 1 >= frames.frame_len:
        raise ValueError("frame too short for the requested f0_min")
    nr = normalized_xcorr(frames.frames, lag_hi + 1)

    n = len(frames)
    f0 = np.zeros(n)
    strength = np.zeros(n)
    lags = np.arange(lag_lo, lag_hi + 1)
    cost = OCTAVE_COST * np.log2(lags / lag_lo)
    for i in range(n):
        row = nr[i]
        seg = row[lag_lo:lag_hi + 1]
        is_peak = (seg >= row[lag_lo - 1:lag_hi]) & (seg >= row[lag_lo + 1:lag_hi + 2])
        if not is_peak.any():
            continue
        score = np.where(is_peak, seg - cost, -np.inf)
        lag = int(lags[np.argmax(score)])
        shift, peak = _parabolic(row[lag - 1], row[lag], row[lag + 1])
        strength[i] = peak
        if peak >= voicing_threshold:
            f0[i] = np.clip(rate / (lag + shift), f0_min, f0_max)
    return PitchTrack(f0=f0, times=frames.centers, strength=strength)


def jitter_local(periods) -> float:
    periods = np.asarray(periods, dtype=np.float64)
    if periods.size < 3:
        return float("nan")
    return float(np.mean(np.abs(np.diff(periods))) / np.mean(periods))


def shimmer_local(amplitudes) -> float:
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    if amplitudes.size < 3:
        return float("nan")
    return float(np.mean(np.abs(np.diff(amplitudes))) / np.mean(amplitudes))


def apq5(amplitudes) -> float:
    """Five-point amplitude perturbation quotient."""
    a = np.asarray(amplitudes, dtype=np.float64)
    if a.size < 5:
        return float("nan")
    smooth = np.convolve(a, np.ones(5) / 5.0, mode="valid")
    return float(np.mean(np.abs(a[2:-2] - smooth)) / np.mean(a))


def _refine_peak(x, i):
    if 0 < i < x.size - 1:
        shift, val = _parabolic(x[i - 1], x[i], x[i + 1])
        return i + shift, val
    return float(i), x[i]


def period_marks(sig: AudioSignal, track: PitchTrack) -> list[tuple[np.ndarray, np.ndarray]]:
    """Waveform peak positions (samples) and heights for every voiced run.

    Each mark is searched within 0.8-1.2 local periods of the previous one.
    """
    x = sig.samples
    rate = sig.sample_rate
    voiced = track.voiced
    if len(track) > 1:
        half = 0.5 * float(np.median(np.diff(track.times)))
    else:
        half = 0.5 * x.size / rate
    runs = []
    i = 0
    while i < voiced.size:
        if not voiced[i]:
            i += 1
            continue
        j = i
        while j + 1 < voiced.size and voiced[j + 1]:
            j += 1
        runs.append((i, j))
        i = j + 1

    out = []
    for a, b in runs:
        lo = max(0, int(round((track.times[a] - half) * rate)))
        hi = min(x.size, int(round((track.times[b] + half) * rate)))
        f0_run = track.f0[a:b + 1]
        t_run = track.times[a:b + 1]

        def local_period(pos):
            k = int(np.argmin(np.abs(t_run - pos / rate)))
            return rate / f0_run[k]

        T = local_period(lo)
        first_hi = min(hi, lo + int(np.ceil(T)))
        if first_hi - lo < 2:
            continue
        m = lo + int(np.argmax(x[lo:first_hi]))
        pos, amp = [], []
        while True:
            p, v = _refine_peak(x, m)
            pos.append(p)
            amp.append(v)
            T = local_period(m)
            s = m + int(np.ceil(0.8 * T))
            e = min(hi, m + int(np.floor(1.2 * T)) + 1)
            if e - s < 1 or s >= hi:
                break
            m = s + int(np.argmax(x[s:e]))
        out.append((np.asarray(pos), np.asarray(amp)))
    return out


def perturbation(sig: AudioSignal, track: PitchTrack) -> dict[str, float]:
    """Local jitter, local shimmer and APQ5 pooled over voiced runs.

    Runs with fewer than three periods are ignored; if none remain every
    output is NaN.
    """
    d_periods, periods, d_amps, amps, apq_terms = [], [], [], [], []
    for pos, amp in period_marks(sig, track):
        per = np.diff(pos)
        if per.size < 3:
            continue
        a = amp[1:]
        periods.append(per)
        d_periods.append(np.abs(np.diff(per)))
        amps.append(a)
        d_amps.append(np.abs(np.diff(a)))
        if a.size >= 5:
            apq_terms.append(np.abs(a[2:-2] - np.convolve(a, np.ones(5) / 5.0, mode="valid")))
    nan = float("nan")
    if not periods:
        return {"jitter_local": nan, "shimmer_local": nan, "apq": nan}
    mean_t = np.mean(np.concatenate(periods))
    mean_a = np.mean(np.concatenate(amps))
    if mean_a <= 0:
        shimmer = apq = nan
    else:
        shimmer = float(np.mean(np.concatenate(d_amps)) / mean_a)
        apq = float(np.mean(np.concatenate(apq_terms)) / mean_a) if apq_terms else nan
    return {
        "jitter_local": float(np.mean(np.concatenate(d_periods)) / mean_t),
        "shimmer_local": shimmer,
        "apq": apq,
    }


def hnr_from_r(r) -> np.ndarray:
    r = np.clip(np.asarray(r, dtype=np.float64), R_CLAMP, 1.0 - R_CLAMP)
    return 10.0 * np.log10(r / (1.0 - r))


def harmonicity(frames: FrameSequence, track: PitchTrack) -> dict[str, float]:
    """Mean HNR (dB), mean NHR and mean harmonic autocorrelation over voiced frames.

    ``r`` is the normalized autocorrelation peak within one sample of the
    lag implied by the frame's f0, refined by parabolic interpolation.
    """
    voiced = np.flatnonzero(track.voiced)
    nan = float("nan")
    if voiced.size == 0:
        return {"hnr_db": nan, "nhr": nan, "harmonicity_mean": nan}
    rate = frames.sample_rate
    lags = np.round(rate / track.f0[voiced]).astype(int)
    max_lag = min(int(lags.max()) + 2, frames.frame_len - 1)
    nr = normalized_xcorr(frames.frames[voiced], max_lag)
    r = np.empty(voiced.size)
    for j, lag in enumerate(lags):
        lag = int(np.clip(lag, 2, max_lag - 2))
        k = lag - 1 + int(np.argmax(nr[j, lag - 1:lag + 2]))
        r[j] = _parabolic(nr[j, k - 1], nr[j, k], nr[j, k + 1])[1]
    r = np.clip(r, R_CLAMP, 1.0 - R_CLAMP)
    return {
        "hnr_db": float(np.mean(hnr_from_r(r))),
        "nhr": float(np.mean((1.0 - r) / r)),
        "harmonicity_mean": float(np.mean(r)),
    }


def default_lpc_order(rate: int) -> int:
    return int(round(2 + rate / 1000.0))


def formant_track(frames: FrameSequence, rate: int | None = None, lpc_order: int | None = None,
                  voiced: np.ndarray | None = None, max_bandwidth: float = 400.0) -> FormantTrack:
    """F1-F3 from the roots of a per-frame LPC polynomial.

    Only roots in the upper half plane with bandwidth below
    ``max_bandwidth`` count; frames with fewer than three such roots, or an
    unstable recursion, are skipped.
    """
    rate = rate or frames.sample_rate
    order = lpc_order or default_lpc_order(rate)
    if voiced is None:
        voiced = np.mean(frames.frames ** 2, axis=1) > EPS
    window = np.hamming(frames.frame_len)
    alpha = np.exp(-2.0 * np.pi * 50.0 / rate)
    rows, idx = [], []
    for i in np.flatnonzero(voiced):
        x = frames.frames[i]
        x = np.append(x[0], x[1:] - alpha * x[:-1]) * window
        try:
            a, _ = levinson(autocorr(x, order), order)
        except LevinsonError:
            continue
        roots = np.roots(np.concatenate([[1.0], -a]))
        roots = roots[np.imag(roots) > 0]
        freqs = np.angle(roots) * rate / (2 * np.pi)
        bws = -np.log(np.abs(roots)) * rate / np.pi
        keep = np.sort(freqs[(bws < max_bandwidth) & (freqs > 0) & (freqs < rate / 2)])
        if keep.size < 3:
            continue
        rows.append(keep[:3])
        idx.append(i)
    arr = np.asarray(rows).reshape(-1, 3)
    return FormantTrack(arr[:, 0], arr[:, 1], arr[:, 2], np.asarray(idx, dtype=int))


def voicing_profile(track: PitchTrack, segs: SegmentList, rate: int) -> dict[str, float]:
    """Voiced/unvoiced frame counts, voicing breaks and segment durations."""
    v = track.voiced
    n_voiced = int(v.sum())
    n_breaks = int(np.count_nonzero(v[:-1] & ~v[1:])) if v.size > 1 else 0
    speech = segs.of(Label.SPEECH)
    pauses = segs.of(Label.DISFLUENCY)
    durations = [len(s) / rate for s in segs]
    return {
        "voiced_frames": float(n_voiced),
        "unvoiced_frames": float(v.size - n_voiced),
        "voiced_fraction": n_voiced / v.size if v.size else float("nan"),
        "n_breaks": float(n_breaks),
        "mean_segment_s": float(np.mean(durations)) if durations else float("nan"),
        "n_segments_speech": float(len(speech)),
        "n_segments_disfluency": float(len(pauses)),
        "total_pause_s": sum(len(s) for s in pauses) / rate,
    }
