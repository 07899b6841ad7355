"""Energy/ZCR voice activity detection and speech/disfluency stream splitting."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import AudioSignal, frame_params, frame_samples


class Label(str, enum.Enum):
    SPEECH = "speech"
    DISFLUENCY = "disfluency"


@dataclass(frozen=True)
class Segment:
    start: int
    end: int  # exclusive
    label: Label

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"empty segment [{self.start}, {self.end})")

    def __len__(self):
        return self.end - self.start


@dataclass
class SegmentList:
    segments: list[Segment] = field(default_factory=list)

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)

    def __getitem__(self, i):
        return self.segments[i]

    @property
    def n_samples(self) -> int:
        return self.segments[-1].end if self.segments else 0

    def of(self, label: Label) -> list[Segment]:
        return [s for s in self.segments if s.label == label]

    def validate(self, n_samples: int | None = None) -> None:
        pos = 0
        prev = None
        for seg in self.segments:
            if seg.start != pos:
                raise ValueError(f"segment starting at {seg.start} leaves a gap or overlap at {pos}")
            if prev is not None and prev.label == seg.label:
                raise ValueError(f"adjacent segments share label {seg.label.value}")
            pos, prev = seg.end, seg
        if n_samples is not None and pos != n_samples:
            raise ValueError(f"segments cover [0, {pos}) but signal has {n_samples} samples")

    @classmethod
    def from_mask(cls, active: np.ndarray) -> "SegmentList":
        """Maximal runs of a per-sample boolean mask."""
        active = np.asarray(active, dtype=bool)
        if active.size == 0:
            return cls([])
        change = np.flatnonzero(np.diff(active.astype(np.int8))) + 1
        bounds = np.concatenate([[0], change, [active.size]])
        segs = [
            Segment(int(a), int(b), Label.SPEECH if active[a] else Label.DISFLUENCY)
            for a, b in zip(bounds[:-1], bounds[1:])
        ]
        return cls(segs)


@dataclass(frozen=True)
class VadConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    energy_threshold_factor: float = 3.0
    zcr_threshold: float = 0.35
    hangover_frames: int = 5
    min_segment_ms: float = 100.0

    def __post_init__(self):
        for name in ("frame_ms", "hop_ms", "energy_threshold_factor", "zcr_threshold",
                     "hangover_frames", "min_segment_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"VadConfig.{name} must be positive")


def _runs(flags: np.ndarray) -> list[tuple[int, int, bool]]:
    out = []
    start = 0
    for i in range(1, flags.size + 1):
        if i == flags.size or flags[i] != flags[start]:
            out.append((start, i, bool(flags[start])))
            start = i
    return out


def _apply_hangover(active: np.ndarray, hangover: int) -> np.ndarray:
    # Activity is held for up to `hangover` frames after a run ends; the hold
    # is kept only if activity resumes inside it, so isolated offsets stay sharp.
    out = active.copy()
    runs = _runs(active)
    for i, (a, b, val) in enumerate(runs):
        if val or i == 0 or i == len(runs) - 1:
            continue
        if b - a <= hangover:
            out[a:b] = True
    return out


def _merge_short_runs(flags: np.ndarray, min_frames: int) -> np.ndarray:
    flags = flags.copy()
    while True:
        runs = _runs(flags)
        if len(runs) <= 1:
            return flags
        short = [(b - a, a, b) for a, b, _ in runs if b - a < min_frames]
        if not short:
            return flags
        _, a, b = min(short)
        flags[a:b] = ~flags[a:b]


def frame_activity(x: np.ndarray, frame_len: int, hop: int, cfg: VadConfig,
                   sample_rate: int) -> np.ndarray:
    """Raw per-frame energy/ZCR decisions before smoothing."""
    frames = frame_samples(x, sample_rate, frame_len, hop).frames
    energy = np.mean(frames ** 2, axis=1)
    signs = np.signbit(frames)
    zcr = np.count_nonzero(signs[:, 1:] != signs[:, :-1], axis=1) / (frame_len - 1)

    n_quiet = max(1, int(np.ceil(0.1 * energy.size)))
    floor = float(np.mean(np.sort(energy)[:n_quiet]))
    loud = energy > cfg.energy_threshold_factor * floor
    if not loud.any():
        # No frame stands out from the floor: the recording is stationary,
        # so the energy test cannot discriminate and ZCR decides alone.
        loud = energy > 0.0
    return loud & (zcr < cfg.zcr_threshold)


def vad(sig: AudioSignal, cfg: VadConfig | None = None) -> SegmentList:
    """Label every sample of ``sig`` as speech or disfluency.

    Frame decisions are smoothed (hangover, then merging of runs shorter
    than ``min_segment_ms``) and mapped back to samples by assigning each
    frame the hop-wide region around its centre.
    """
    cfg = cfg or VadConfig()
    frame_len, hop = frame_params(sig.sample_rate, cfg.frame_ms, cfg.hop_ms)
    n = len(sig)
    if n < frame_len:
        raise ValueError(f"signal of {n} samples is shorter than one VAD frame ({frame_len})")

    active = frame_activity(sig.samples, frame_len, hop, cfg, sig.sample_rate)
    active = _apply_hangover(active, int(cfg.hangover_frames))
    min_frames = max(1, int(np.ceil(cfg.min_segment_ms / cfg.hop_ms)))
    active = _merge_short_runs(active, min_frames)

    # frame i owns samples between the midpoints of neighbouring centres
    centers = np.arange(active.size) * hop + frame_len / 2.0
    edges = np.concatenate([[0.0], (centers[:-1] + centers[1:]) / 2.0, [float(n)]])
    edges = np.clip(np.ceil(edges).astype(int), 0, n)
    per_sample = np.repeat(active, np.diff(edges))
    segs = SegmentList.from_mask(per_sample)
    segs.validate(n)
    return segs


def split_streams(sig: AudioSignal, segs: SegmentList) -> tuple[AudioSignal, AudioSignal]:
    """Concatenate speech samples and disfluency samples into two signals."""
    segs.validate(len(sig))
    parts = {Label.SPEECH: [], Label.DISFLUENCY: []}
    for seg in segs:
        parts[seg.label].append(sig.samples[seg.start:seg.end])
    speech, disfl = (
        np.concatenate(parts[lab]) if parts[lab] else np.zeros(0)
        for lab in (Label.SPEECH, Label.DISFLUENCY)
    )
    return AudioSignal(speech, sig.sample_rate), AudioSignal(disfl, sig.sample_rate)


def write_segments_csv(path, segs: SegmentList, sample_rate: int,
                       provenance: dict[str, str] | None = None) -> None:
    """``start_s,end_s,label`` rows after optional ``# key=value`` lines."""
    with open(path, "w", newline="") as fh:
        for k, v in sorted((provenance or {}).items()):
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start_s", "end_s", "label"])
        for s in segs:
            w.writerow([f"{s.start / sample_rate:.6f}", f"{s.end / sample_rate:.6f}", s.label.value])


def read_segments_csv(path, sample_rate: int) -> SegmentList:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return SegmentList([
        Segment(int(round(float(r["start_s"]) * sample_rate)),
                int(round(float(r["end_s"]) * sample_rate)),
                Label(r["label"]))
        for r in rows
    ])
