"""Per-recording feature vectors and CSV datasets.

Every frame-level track is summarised by six functionals; scalar
descriptors are appended as-is. Names follow
``<stream>.<family>.<feature>[.<functional>]`` and the inventory depends on
the configuration only, so every recording in a run shares one header.
Missing values (empty streams, too few periods, ...) are NaN until
:func:`impute_median` fills them.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import classical, nonlinear, perceptual
from .audio_io import AudioSignal, frame_params, frame_samples
from .segmentation import SegmentList

INVENTORY_VERSION = "1"
STREAMS = ("speech", "disfluency")
FUNCTIONALS = ("mean", "median", "min", "max", "mode", "std")
DEFAULT_CLASSES = ("CR", "MCI")
MODE_BINS = 32


class DatasetError(ValueError):
    pass


class MalformedDatasetError(DatasetError):
    pass


class DuplicateFeatureError(DatasetError):
    pass


class UnknownLabelError(DatasetError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    f0_min: float = 60.0
    f0_max: float = 400.0
    voicing_threshold: float = 0.45
    formant_lpc_order: int = 0  # 0 = 2 + rate/1000
    n_mels: int = 26
    n_mfcc: int = 13
    lpcc_order: int = 12
    lpcc_coeffs: int = 13
    plp_order: int = 12
    delta_width: int = 2
    entropy_bins: int = 64
    higuchi_kmax: int = 10
    pe_order: int = 3
    pe_delay: int = 1
    pe_scales: int = 5


def functionals(series) -> dict[str, float]:
    """mean, median, min, max, mode and population std of a series.

    The mode is the centre of the most populated of 32 equal-width bins
    spanning the data (lowest bin wins ties).
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        return {k: math.nan for k in FUNCTIONALS}
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        mode = lo
    else:
        width = (hi - lo) / MODE_BINS
        idx = np.clip(np.floor((x - lo) / width).astype(np.int64), 0, MODE_BINS - 1)
        best = int(np.argmax(np.bincount(idx, minlength=MODE_BINS)))
        mode = lo + (best + 0.5) * width
    return {
        "mean": float(x.mean()),
        "median": float(np.median(x)),
        "min": lo,
        "max": hi,
        "mode": mode,
        "std": float(x.std()),
    }


# -- inventory -------------------------------------------------------------

def _track_names(cfg: FeatureConfig, stream: str) -> list[tuple[str, str]]:
    """(family, feature) pairs for frame-level tracks of one stream."""
    out = [("energy", "short_time_energy"), ("energy", "intensity_db"),
           ("time", "zcr"), ("spectral", "spectral_centroid"), ("pitch", "f0")]
    if stream == "speech":
        out += [("formant", "f1"), ("formant", "f2"), ("formant", "f3")]
    mf = [f"c{i}" for i in range(cfg.n_mfcc)]
    out += [("mfcc", n) for n in mf]
    out += [("mfcc", f"d_{n}") for n in mf]
    out += [("mfcc", f"dd_{n}") for n in mf]
    out += [("lpcc", f"c{i}") for i in range(cfg.lpcc_coeffs)]
    out += [("plp", f"c{i}") for i in range(cfg.plp_order + 1)]
    return out


_SPEECH_ONLY_SCALARS = [
    ("perturbation", "jitter_local"), ("perturbation", "shimmer_local"), ("perturbation", "apq"),
    ("harmonicity", "hnr_db"), ("harmonicity", "nhr"), ("harmonicity", "harmonicity_mean"),
]
_TRACK_VOICING = ["voiced_frames", "unvoiced_frames", "voiced_fraction", "n_breaks"]
_SEGMENT_VOICING = ["mean_segment_s", "n_segments_speech", "n_segments_disfluency", "total_pause_s"]


def _scalar_names(cfg: FeatureConfig, stream: str) -> list[tuple[str, str]]:
    out = []
    if stream == "speech":
        out += _SPEECH_ONLY_SCALARS
    out += [("voicing", n) for n in _TRACK_VOICING]
    if stream == "speech":
        out += [("voicing", n) for n in _SEGMENT_VOICING]
    out += [("nonlinear", "shannon_entropy"), ("nonlinear", "higuchi_fd")]
    out += [("nonlinear", f"mspe_s{s}") for s in range(1, cfg.pe_scales + 1)]
    return out


def stream_feature_names(cfg: FeatureConfig, stream: str) -> list[str]:
    names = [f"{stream}.{fam}.{feat}.{fn}" for fam, feat in _track_names(cfg, stream)
             for fn in FUNCTIONALS]
    names += [f"{stream}.{fam}.{feat}" for fam, feat in _scalar_names(cfg, stream)]
    return names


def feature_names(cfg: FeatureConfig | None = None) -> list[str]:
    cfg = cfg or FeatureConfig()
    return [n for s in STREAMS for n in stream_feature_names(cfg, s)]


# -- extraction ------------------------------------------------------------

def _stream_values(sig: AudioSignal, stream: str, segs: SegmentList,
                   cfg: FeatureConfig) -> dict[str, float]:
    rate = sig.sample_rate
    frame_len, hop = frame_params(rate, cfg.frame_ms, cfg.hop_ms)
    if len(sig) < frame_len:
        return {}
    frames = frame_samples(sig.samples, rate, frame_len, hop)
    tracks: dict[tuple[str, str], np.ndarray] = {}
    desc = classical.descriptor_tracks(frames.frames, rate)
    tracks["energy", "short_time_energy"] = desc["short_time_energy"]
    tracks["energy", "intensity_db"] = desc["intensity_db"]
    tracks["time", "zcr"] = desc["zcr"]
    tracks["spectral", "spectral_centroid"] = desc["spectral_centroid"]

    pitch = classical.pitch_track(frames, rate, cfg.f0_min, cfg.f0_max, cfg.voicing_threshold)
    tracks["pitch", "f0"] = pitch.f0[pitch.voiced]

    scalars: dict[tuple[str, str], float] = {}
    if stream == "speech":
        fm = classical.formant_track(frames, rate, cfg.formant_lpc_order or None, voiced=pitch.voiced)
        tracks["formant", "f1"], tracks["formant", "f2"], tracks["formant", "f3"] = fm.f1, fm.f2, fm.f3
        for k, v in classical.perturbation(sig, pitch).items():
            scalars["perturbation", k] = v
        for k, v in classical.harmonicity(frames, pitch).items():
            scalars["harmonicity", k] = v

    mf = perceptual.mfcc(frames, rate, cfg.n_mels, cfg.n_mfcc)
    d1, d2 = perceptual.deltas(mf, cfg.delta_width)
    for tr in (mf, d1, d2):
        for j, name in enumerate(tr.names):
            tracks["mfcc", name] = tr.values[:, j]
    for tr in (perceptual.lpcc(frames, cfg.lpcc_order, cfg.lpcc_coeffs),
               perceptual.plp(frames, rate, cfg.plp_order)):
        for j, name in enumerate(tr.names):
            tracks[tr.family, name] = tr.values[:, j]

    vp = classical.voicing_profile(pitch, segs, rate)
    for k in _TRACK_VOICING:
        scalars["voicing", k] = vp[k]
    if stream == "speech":
        for k in _SEGMENT_VOICING:
            scalars["voicing", k] = vp[k]

    nl = nonlinear.summarize(sig, cfg.entropy_bins, cfg.higuchi_kmax, cfg.pe_order,
                             cfg.pe_delay, cfg.pe_scales)
    scalars["nonlinear", "shannon_entropy"] = nl.shannon_entropy
    scalars["nonlinear", "higuchi_fd"] = nl.higuchi_fd
    for s in range(cfg.pe_scales):
        scalars["nonlinear", f"mspe_s{s + 1}"] = float(nl.mspe[s])

    out = {}
    for (fam, feat), series in tracks.items():
        for fn, v in functionals(series).items():
            out[f"{stream}.{fam}.{feat}.{fn}"] = v
    for (fam, feat), v in scalars.items():
        out[f"{stream}.{fam}.{feat}"] = v
    return out


@dataclass
class NamedFeatureVector:
    names: list[str]
    values: np.ndarray
    recording_id: str = ""
    label: str | None = None

    def __len__(self):
        return len(self.names)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def assemble(speech: AudioSignal, disfluency: AudioSignal, segs: SegmentList,
             cfg: FeatureConfig | None = None, recording_id: str = "",
             label: str | None = None) -> NamedFeatureVector:
    """Full feature vector over both streams; an empty stream gives a NaN block."""
    cfg = cfg or FeatureConfig()
    if len(speech) == 0 and len(disfluency) == 0:
        raise ValueError("both streams are empty")
    names = feature_names(cfg)
    got: dict[str, float] = {}
    for stream, sig in zip(STREAMS, (speech, disfluency)):
        got.update(_stream_values(sig, stream, segs, cfg))
    unknown = set(got) - set(names)
    if unknown:
        raise AssertionError(f"extractor produced names outside the inventory: {sorted(unknown)[:5]}")
    values = np.array([got.get(n, math.nan) for n in names], dtype=np.float64)
    values[~np.isfinite(values)] = math.nan
    return NamedFeatureVector(names, values, recording_id, label)


# -- datasets --------------------------------------------------------------

@dataclass
class Dataset:
    X: np.ndarray
    names: list[str]
    labels: list[str | None]
    ids: list[str]
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(len(self.ids), len(self.names))
        if len(set(self.names)) != len(self.names):
            raise DuplicateFeatureError("duplicate feature names")
        if not len(self.labels) == len(self.ids) == self.X.shape[0]:
            raise DatasetError("row count mismatch between X, labels and ids")

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]

    @property
    def classes(self) -> tuple[str, ...]:
        present = sorted({lab for lab in self.labels if lab is not None})
        if set(present) <= set(DEFAULT_CLASSES):
            return DEFAULT_CLASSES
        return tuple(present)

    @property
    def y(self) -> np.ndarray:
        """Labels as indices into :attr:`classes`."""
        cls = self.classes
        return np.array([cls.index(lab) for lab in self.labels], dtype=np.int64)

    def subset(self, rows=None, cols=None) -> "Dataset":
        rows = np.arange(len(self)) if rows is None else np.asarray(rows)
        cols = np.arange(self.n_features) if cols is None else np.asarray(cols, dtype=np.int64)
        return Dataset(
            self.X[np.ix_(rows, cols)],
            [self.names[c] for c in cols],
            [self.labels[r] for r in rows],
            [self.ids[r] for r in rows],
            dict(self.provenance),
        )

    def with_X(self, X: np.ndarray) -> "Dataset":
        return Dataset(X, list(self.names), list(self.labels), list(self.ids), dict(self.provenance))


def stack(vectors: Sequence[NamedFeatureVector], provenance: dict[str, str] | None = None) -> Dataset:
    if not vectors:
        raise DatasetError("no feature vectors")
    names = vectors[0].names
    for v in vectors[1:]:
        if v.names != names:
            raise DatasetError(f"feature names of {v.recording_id!r} differ from the first vector")
    return Dataset(np.vstack([v.values for v in vectors]), list(names),
                   [v.label for v in vectors], [v.recording_id for v in vectors],
                   dict(provenance or {}))


def fit_medians(X: np.ndarray) -> np.ndarray:
    """Per-column median over non-NaN rows; all-NaN columns get 0."""
    med = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        ok = col[~np.isnan(col)]
        if ok.size:
            med[j] = np.median(ok)
    return med


def impute_median(ds: Dataset, medians: np.ndarray | None = None) -> Dataset:
    medians = fit_medians(ds.X) if medians is None else medians
    X = ds.X.copy()
    r, c = np.nonzero(np.isnan(X))
    X[r, c] = medians[c]
    return ds.with_X(X)


def _fmt(v: float) -> str:
    return "NaN" if math.isnan(v) else repr(float(v))


def write_dataset(ds: Dataset, path) -> None:
    """CSV with an optional ``# key=value`` provenance preamble."""
    buf = io.StringIO()
    for k, v in sorted(ds.provenance.items()):
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", *ds.names, "label"])
    for rid, row, lab in zip(ds.ids, ds.X, ds.labels):
        w.writerow([rid, *(_fmt(v) for v in row), lab or ""])
    Path(path).write_text(buf.getvalue())


def read_dataset(path, allowed_labels: Iterable[str] = DEFAULT_CLASSES) -> Dataset:
    allowed = set(allowed_labels)
    text = Path(path).read_text()
    prov = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            prov[k.strip()] = v.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise MalformedDatasetError(f"{path}: no header")
    header = rows[0]
    if len(header) < 2 or header[0] != "id" or header[-1] != "label":
        raise MalformedDatasetError(f"{path}: header must be id,<features...>,label")
    names = header[1:-1]
    seen = set()
    for n in names:
        if n in seen:
            raise DuplicateFeatureError(f"{path}: duplicate feature column {n!r}")
        seen.add(n)
    ids, labels, data = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise MalformedDatasetError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        lab = row[-1] or None
        if lab is not None and lab not in allowed:
            raise UnknownLabelError(f"{path}: row {lineno} has unknown label {lab!r}")
        try:
            data.append([float(v) for v in row[1:-1]])
        except ValueError as exc:
            raise MalformedDatasetError(f"{path}: row {lineno}: {exc}") from exc
        ids.append(row[0])
        labels.append(lab)
    X = np.asarray(data, dtype=np.float64).reshape(len(ids), len(names))
    return Dataset(X, names, labels, ids, prov)
