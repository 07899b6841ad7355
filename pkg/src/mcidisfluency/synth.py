"""Synthetic two-class corpus of vowel bursts separated by pauses.

Each recording alternates formant-filtered glottal pulse trains with
low-level noise. The classes differ in how often and how long the speaker
pauses, and in cycle-to-cycle period jitter. Ground-truth segments are
written next to every WAV.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio_io import CANONICAL_RATE, AudioSignal, write_wav
from .segmentation import Label, Segment, SegmentList, write_segments_csv

VOWELS = {
    "a": (700.0, 1220.0, 2600.0),
    "e": (530.0, 1840.0, 2480.0),
    "i": (300.0, 2300.0, 3000.0),
    "o": (570.0, 840.0, 2410.0),
    "u": (300.0, 870.0, 2240.0),
}
FORMANT_BW = (80.0, 100.0, 120.0)


@dataclass(frozen=True)
class ClassGenerator:
    pause_rate: float  # pauses per second
    pause_mean_s: float
    pause_sd_s: float
    jitter: float  # relative s.d. of consecutive periods
    noise_level: float  # rms of background noise
    f0_mean: float = 140.0

    def __post_init__(self):
        if self.pause_rate <= 0 or self.pause_mean_s <= 0 or self.pause_sd_s < 0:
            raise ValueError("pause distribution parameters must be positive")
        if self.jitter < 0 or self.noise_level < 0 or self.f0_mean <= 0:
            raise ValueError("jitter, noise and f0 must be non-negative")


@dataclass(frozen=True)
class SynthCorpusSpec:
    n_per_class: int = 30
    duration_s: float = 3.0
    sample_rate: int = CANONICAL_RATE
    seed: int = 0
    classes: dict[str, ClassGenerator] = field(default_factory=lambda: {
        "CR": ClassGenerator(pause_rate=0.6, pause_mean_s=0.22, pause_sd_s=0.05,
                             jitter=0.004, noise_level=0.002),
        "MCI": ClassGenerator(pause_rate=1.2, pause_mean_s=0.45, pause_sd_s=0.10,
                              jitter=0.02, noise_level=0.002),
    })

    def __post_init__(self):
        if self.n_per_class < 1 or self.duration_s <= 0:
            raise ValueError("n_per_class and duration_s must be positive")
        if len(self.classes) != 2:
            raise ValueError("exactly two classes are required")
        a, b = self.classes.values()
        if a == b:
            raise ValueError("class generators must differ in at least one parameter")


def _resonate(x, freq, bw, rate):
    r = np.exp(-np.pi * bw / rate)
    theta = 2.0 * np.pi * freq / rate
    return lfilter([1.0 - r], [1.0, -2.0 * r * np.cos(theta), r * r], x)


def vowel_burst(n: int, rate: int, f0: float, jitter: float, formants, rng) -> np.ndarray:
    """Sawtooth glottal source with jittered periods through three resonators."""
    src = np.zeros(n)
    pos = 0.0
    T0 = rate / f0
    while pos < n:
        T = T0 * (1.0 + jitter * rng.standard_normal())
        T = max(T, 0.5 * T0)
        a, b = int(pos), min(n, int(pos + T))
        if b > a:
            src[a:b] = np.linspace(-1.0, 1.0, b - a, endpoint=False)
        pos += T
    y = src
    for f, bw in zip(formants, FORMANT_BW):
        y = _resonate(y, f, bw, rate)
    y /= np.max(np.abs(y)) + 1e-12
    ramp = min(int(0.01 * rate), n // 2)
    if ramp > 0:
        env = np.ones(n)
        w = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = w
        env[n - ramp:] = w[::-1]
        y *= env
    return y


def _layout(gen: ClassGenerator, duration: float, rng) -> list[tuple[float, bool]]:
    """(duration, is_speech) pieces starting and ending with a short pause."""
    edge = 0.15
    # stochastic rounding keeps the mean rate but, unlike a Poisson count,
    # never lets a fluent recording pause as often as a disfluent one
    n_pauses = max(1, int(np.floor(gen.pause_rate * duration + rng.uniform())))
    while True:
        pauses = np.clip(gen.pause_mean_s + gen.pause_sd_s * rng.standard_normal(n_pauses), 0.15, None)
        speech_total = duration - 2 * edge - pauses.sum()
        if speech_total >= 0.3 * (n_pauses + 1) or n_pauses == 1:
            break
        n_pauses -= 1
    speech_total = max(speech_total, 0.3 * (n_pauses + 1))
    shares = rng.dirichlet(np.full(n_pauses + 1, 4.0))
    bursts = 0.3 * np.ones(n_pauses + 1) + shares * (speech_total - 0.3 * (n_pauses + 1))
    pieces = [(edge, False)]
    for i, b in enumerate(bursts):
        pieces.append((float(b), True))
        if i < n_pauses:
            pieces.append((float(pauses[i]), False))
    pieces.append((edge, False))
    return pieces


def synth_recording(gen: ClassGenerator, duration: float, rate: int, rng) -> tuple[AudioSignal, SegmentList]:
    pieces = _layout(gen, duration, rng)
    f0 = gen.f0_mean * (1.0 + 0.1 * rng.standard_normal())
    chunks, segs, pos = [], [], 0
    for dur, speech in pieces:
        n = int(round(dur * rate))
        if n <= 0:
            continue
        if speech:
            vowel = VOWELS[rng.choice(sorted(VOWELS))]
            amp = rng.uniform(0.3, 0.6)
            chunks.append(amp * vowel_burst(n, rate, f0, gen.jitter, vowel, rng))
        else:
            chunks.append(np.zeros(n))
        label = Label.SPEECH if speech else Label.DISFLUENCY
        if segs and segs[-1].label == label:
            segs[-1] = Segment(segs[-1].start, pos + n, label)
        else:
            segs.append(Segment(pos, pos + n, label))
        pos += n
    x = np.concatenate(chunks)
    x += gen.noise_level * rng.standard_normal(x.size)
    x = np.clip(x, -1.0, 32767 / 32768)
    return AudioSignal(x, rate), SegmentList(segs)


def synth_corpus(spec: SynthCorpusSpec, out_dir) -> Path:
    """Write WAVs, ``<name>.segments.csv`` files and ``labels.csv``; returns the label file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["filename,label"]
    for ci, (label, gen) in enumerate(spec.classes.items()):
        for i in range(spec.n_per_class):
            rng = np.random.default_rng([spec.seed, ci, i])
            sig, segs = synth_recording(gen, spec.duration_s, spec.sample_rate, rng)
            name = f"{label.lower()}_{i:03d}.wav"
            write_wav(out / name, sig)
            write_segments_csv(out / f"{name[:-4]}.segments.csv", segs, spec.sample_rate,
                               {"synth_seed": str(spec.seed), "label": label})
            lines.append(f"{name},{label}")
    labels = out / "labels.csv"
    labels.write_text("\n".join(lines) + "\n")
    return labels
