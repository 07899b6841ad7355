"""Pipeline configuration: defaults, flat ``section.key = value`` files, hashing."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .assembly import FeatureConfig
from .audio_io import CANONICAL_RATE
from .classifiers import ClassifierSpec
from .segmentation import VadConfig

DEFAULT_CLASSIFIERS = ("knn", "svm", "mlp", "cnn")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AudioConfig:
    rate: int = CANONICAL_RATE


@dataclass(frozen=True)
class SelectionConfig:
    alpha: float = 0.1
    k: int = 80
    svm_c: float = 1.0
    enabled: bool = True


@dataclass(frozen=True)
class CVConfig:
    k: int = 10
    seed: int = 0
    repeats: int = 1
    global_preprocess: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    audio: AudioConfig = field(default_factory=AudioConfig)
    vad: VadConfig = field(default_factory=VadConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    cv: CVConfig = field(default_factory=CVConfig)
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)
    classifiers: tuple[str, ...] = DEFAULT_CLASSIFIERS

    def specs(self) -> list[ClassifierSpec]:
        return [self.classifier.with_(kind=k) for k in self.classifiers]

    def to_flat(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                for sf in fields(v):
                    out[f"{f.name}.{sf.name}"] = _fmt(getattr(v, sf.name))
            else:
                out[f.name] = _fmt(v)
        out.pop("classifier.kind", None)
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.to_flat().items()))

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def override(self, flat: dict[str, str]) -> "PipelineConfig":
        """Return a copy with ``section.key`` entries replaced (values as text)."""
        cfg = self
        for key, text in flat.items():
            section, _, name = key.partition(".")
            if not name:
                if section != "classifiers":
                    raise ConfigError(f"unknown config key {key!r}")
                kinds = tuple(s.strip() for s in text.split(",") if s.strip())
                for k in kinds:
                    try:
                        ClassifierSpec(kind=k)
                    except ValueError as exc:
                        raise ConfigError(f"classifiers: {exc}") from exc
                cfg = replace(cfg, classifiers=kinds)
                continue
            sub = getattr(cfg, section, None)
            if not dataclasses.is_dataclass(sub):
                raise ConfigError(f"unknown config section {section!r}")
            ftypes = {f.name: f for f in fields(sub)}
            if name not in ftypes or (section == "classifier" and name == "kind"):
                raise ConfigError(f"unknown config key {key!r}")
            current = getattr(sub, name)
            try:
                value = _parse(text, current)
                cfg = replace(cfg, **{section: replace(sub, **{name: value})})
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        return cfg


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(text: str, like):
    text = text.strip()
    if isinstance(like, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    if isinstance(like, tuple):
        return tuple(int(s) for s in text.split(",") if s.strip())
    return text


def parse_flat(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        out[key.strip()] = value.strip()
    return out


def load_config(path=None, overrides: dict[str, str] | None = None) -> PipelineConfig:
    """Defaults, then the file at ``path``, then ``overrides``."""
    cfg = PipelineConfig()
    if path is not None:
        cfg = cfg.override(parse_flat(Path(path).read_text()))
    if overrides:
        cfg = cfg.override(overrides)
    return cfg
