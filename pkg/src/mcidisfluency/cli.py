"""Command-line pipeline: synth, segment, extract, select, train, evaluate, run.

Every artifact written here embeds the configuration hash, so two files
with equal hashes come from identical settings. Configuration is layered:
defaults, then ``--config FILE`` (``section.key = value`` lines), then
``--set section.key=value`` and the dedicated flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import classifiers
from .assembly import Dataset, DatasetError, assemble, read_dataset, stack, write_dataset
from .audio_io import AudioError, load
from .config import ConfigError, PipelineConfig, load_config
from .evaluation import EvaluationReport, FoldError, cross_validate_many, reports_to_csv
from .segmentation import split_streams, vad, write_segments_csv
from .selection import NoFeaturesSurviveError, fit_preprocess
from .synth import SynthCorpusSpec, synth_corpus

PROG = "mcidisfluency"


class PipelineError(RuntimeError):
    """An error tagged with the pipeline stage it came from."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def _prov(cfg: PipelineConfig, **extra) -> dict[str, str]:
    return {"config": cfg.hash(), **{k: str(v) for k, v in extra.items()}}


# -- stages ----------------------------------------------------------------

def cmd_segment(wav, cfg: PipelineConfig, out=None) -> Path:
    """VAD one WAV; writes ``<wav>.segments.csv`` unless ``out`` is given."""
    wav = Path(wav)
    sig = load(wav, cfg.audio.rate)
    segs = vad(sig, cfg.vad)
    out = Path(out) if out is not None else wav.with_suffix(".segments.csv")
    write_segments_csv(out, segs, sig.sample_rate, _prov(cfg))
    return out


def read_labels(path) -> dict[str, str]:
    """``filename,label`` lines (a header row of exactly that is skipped)."""
    out = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].startswith("#"):
                continue
            if len(row) != 2:
                raise DatasetError(f"{path}: line {lineno}: expected filename,label")
            name, label = row[0].strip(), row[1].strip()
            if lineno == 1 and (name, label) == ("filename", "label"):
                continue
            if name in out:
                raise DatasetError(f"{path}: {name!r} labelled twice")
            out[name] = label
    return out


def extract_one(path, label: str | None, cfg: PipelineConfig):
    sig = load(path, cfg.audio.rate)
    segs = vad(sig, cfg.vad)
    speech, disfl = split_streams(sig, segs)
    return assemble(speech, disfl, segs, cfg.features, Path(path).name, label)


def _extract_job(args):
    path, label, cfg = args
    try:
        return extract_one(path, label, cfg), None
    except (AudioError, ValueError) as exc:
        return None, f"{Path(path).name}: {exc}"


@dataclass
class ExtractResult:
    dataset: Dataset
    skipped: list[str]


def cmd_extract(wav_dir, labels_path, cfg: PipelineConfig, out=None, skip_bad: bool = False,
                jobs: int = 1) -> ExtractResult:
    """One dataset row per labelled WAV, rows in sorted filename order.

    Unlabelled WAVs, labels without a WAV and unreadable files are all
    collected first; the run aborts listing them unless ``skip_bad``.
    """
    wav_dir = Path(wav_dir)
    labels = read_labels(labels_path)
    wavs = sorted(p.name for p in wav_dir.iterdir() if p.suffix.lower() == ".wav")
    problems = [f"{w}: no label" for w in wavs if w not in labels]
    problems += [f"{n}: labelled but missing" for n in sorted(labels) if n not in wavs]
    todo = [(wav_dir / w, labels[w], cfg) for w in wavs if w in labels]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_extract_job, todo))
    else:
        results = [_extract_job(t) for t in todo]
    vectors = [v for v, _ in results if v is not None]
    problems += [e for _, e in results if e is not None]
    if problems and not skip_bad:
        raise PipelineError("extract", "bad inputs (use --skip-bad to continue):\n  "
                            + "\n  ".join(problems))
    if not vectors:
        raise PipelineError("extract", "no usable recordings")
    ds = stack(vectors, _prov(cfg, n_recordings=len(vectors)))
    if out is not None:
        write_dataset(ds, out)
    return ExtractResult(ds, problems)


def cmd_select(ds: Dataset, cfg: PipelineConfig, out=None, report_path=None) -> Dataset:
    """Impute, U-test filter, normalize and keep the SVM top-k on all rows."""
    s = cfg.selection
    pre = fit_preprocess(ds, s.alpha, s.k, s.svm_c, select=s.enabled)
    sel = pre.transform(ds)
    sel.provenance = _prov(cfg, d_initial=pre.report.n_initial, d_utest=pre.report.n_utest,
                           d_final=sel.n_features)
    if out is not None:
        write_dataset(sel, out)
    if report_path is not None:
        pre.report.write_csv(report_path, _prov(cfg))
    return sel


def cmd_train(ds: Dataset, cfg: PipelineConfig, out=None) -> classifiers.TrainedModel:
    """Fit ``cfg.classifier`` on an already selected and normalized dataset."""
    model = classifiers.train(cfg.classifier, ds)
    if out is not None:
        classifiers.save_model(model, out, {"config": cfg.hash(), "features": list(ds.names)})
    return model


def cmd_evaluate(ds: Dataset, cfg: PipelineConfig) -> list[EvaluationReport]:
    cv = cfg.cv
    try:
        return cross_validate_many(
            ds, cfg.specs(), cv.k, cv.seed, cv.global_preprocess, alpha=cfg.selection.alpha,
            k_features=cfg.selection.k, select=cfg.selection.enabled, repeats=cv.repeats)
    except (FoldError, NoFeaturesSurviveError, ValueError) as exc:
        raise PipelineError("evaluate", str(exc)) from exc


def report_document(reports: list[EvaluationReport], cfg: PipelineConfig) -> dict:
    sel = reports[0].selection
    return {
        "config_hash": cfg.hash(),
        "config": cfg.to_flat(),
        "policy": reports[0].policy,
        "funnel": {k: sel[k] for k in ("d_initial", "d_utest", "d_final")},
        "classifiers": [r.to_dict() for r in reports],
    }


def write_reports(reports: list[EvaluationReport], cfg: PipelineConfig, out_dir,
                  figures: bool = True) -> dict[str, Path]:
    """``report.json``, ``report.csv`` and (optionally) PNG figures in ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"json": out_dir / "report.json", "csv": out_dir / "report.csv"}
    doc = report_document(reports, cfg)
    paths["json"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    paths["csv"].write_text(f"# config={cfg.hash()}\n" + reports_to_csv(reports))
    if figures:
        from .plots import cer_figure, funnel_figure

        tag = {"config": cfg.hash()}
        paths["cer_png"] = cer_figure(reports, out_dir / "cer.png", tag)
        paths["funnel_png"] = funnel_figure(reports[0].selection, out_dir / "funnel.png", tag)
    return paths


def funnel_line(sel: dict) -> str:
    return f"{sel['d_initial']} → {sel['d_utest']} → {sel['d_final']}"


def summary_lines(reports: list[EvaluationReport]) -> list[str]:
    lines = [f"features: {funnel_line(reports[0].selection)}"]
    for r in reports:
        per = " ".join(f"{c}={v:.2f}" for c, v in r.per_class_cer.items())
        lines.append(f"{r.classifier}: CER {r.overall_cer:.2f}% ({per})")
    return lines


def cmd_run(cfg: PipelineConfig, out_dir, dataset=None, wav_dir=None, labels=None,
            skip_bad: bool = False, jobs: int = 1, figures: bool = True):
    """Extract (unless ``dataset`` is given), then cross-validate every classifier.

    Writes ``dataset.csv`` (when extracting), ``selection.csv`` and the
    report files to ``out_dir``; returns the reports.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if dataset is not None:
        try:
            ds = read_dataset(dataset)
        except (DatasetError, OSError) as exc:
            raise PipelineError("load", str(exc)) from exc
    else:
        if wav_dir is None or labels is None:
            raise PipelineError("run", "need either --dataset or --wav-dir with --labels")
        ds = cmd_extract(wav_dir, labels, cfg, out_dir / "dataset.csv", skip_bad, jobs).dataset
    try:
        cmd_select(ds, cfg, report_path=out_dir / "selection.csv")
    except (NoFeaturesSurviveError, ValueError) as exc:
        raise PipelineError("select", str(exc)) from exc
    reports = cmd_evaluate(ds, cfg)
    write_reports(reports, cfg, out_dir, figures)
    return reports


# -- argument parsing --------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat 'section.key = value' file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config entry (repeatable)")
    p.add_argument("--seed", type=int, help="cross-validation seed")


def _cv_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--global-preprocess", action="store_true",
                   help="fit selection/normalization on all rows (leaks test folds)")
    p.add_argument("--repeats", type=int, help="repeat CV with seeds seed..seed+n-1")
    p.add_argument("--classifiers", help="comma-separated subset of knn,svm,mlp,cnn,majority")
    p.add_argument("--no-figures", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog=PROG, description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic two-class corpus")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--n-per-class", type=int, default=30)
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("segment", help="speech/disfluency segments of one WAV")
    p.add_argument("wav", type=Path)
    p.add_argument("-o", "--out", type=Path)
    _common(p)

    p = sub.add_parser("extract", help="feature dataset from a WAV directory")
    p.add_argument("wav_dir", type=Path)
    p.add_argument("labels", type=Path, help="filename,label file")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--skip-bad", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    _common(p)

    p = sub.add_parser("select", help="selected and normalized dataset")
    p.add_argument("dataset", type=Path)
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--report", type=Path, help="per-feature selection CSV")
    _common(p)

    p = sub.add_parser("train", help="fit one classifier on a selected dataset")
    p.add_argument("dataset", type=Path)
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--classifier", default=None, help="knn, svm, mlp, cnn or majority")
    _common(p)

    p = sub.add_parser("evaluate", help="cross-validate classifiers on a dataset")
    p.add_argument("dataset", type=Path)
    p.add_argument("-o", "--out-dir", type=Path, required=True)
    _common(p)
    _cv_flags(p)

    p = sub.add_parser("run", help="extract, select and cross-validate")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dataset", type=Path)
    src.add_argument("--wav-dir", type=Path)
    p.add_argument("--labels", type=Path)
    p.add_argument("-o", "--out-dir", type=Path, required=True)
    p.add_argument("--skip-bad", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    _common(p)
    _cv_flags(p)
    return ap


def config_from_args(args) -> PipelineConfig:
    flat = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        flat[key.strip()] = value.strip()
    if getattr(args, "seed", None) is not None:
        flat["cv.seed"] = str(args.seed)
    if getattr(args, "repeats", None) is not None:
        flat["cv.repeats"] = str(args.repeats)
    if getattr(args, "global_preprocess", False):
        flat["cv.global_preprocess"] = "true"
    if getattr(args, "classifiers", None):
        flat["classifiers"] = args.classifiers
    cfg = load_config(args.config, flat)
    if getattr(args, "classifier", None):
        try:
            cfg = PipelineConfig(**{**cfg.__dict__,
                                    "classifier": cfg.classifier.with_(kind=args.classifier)})
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg


def _dispatch(args) -> int:
    if args.command == "synth":
        labels = synth_corpus(SynthCorpusSpec(args.n_per_class, args.duration, seed=args.seed),
                              args.out_dir)
        print(f"wrote {2 * args.n_per_class} recordings; labels in {labels}")
        return 0

    cfg = config_from_args(args)
    if args.command == "segment":
        print(cmd_segment(args.wav, cfg, args.out))
    elif args.command == "extract":
        res = cmd_extract(args.wav_dir, args.labels, cfg, args.out, args.skip_bad, args.jobs)
        for msg in res.skipped:
            print(f"{PROG}: skipped {msg}", file=sys.stderr)
        print(f"{len(res.dataset)} rows x {res.dataset.n_features} features -> {args.out}")
    elif args.command == "select":
        sel = cmd_select(read_dataset(args.dataset), cfg, args.out, args.report)
        p = sel.provenance
        print(f"features: {p['d_initial']} → {p['d_utest']} → {p['d_final']}")
    elif args.command == "train":
        model = cmd_train(read_dataset(args.dataset), cfg, args.out)
        print(f"{cfg.classifier.label} on {model.n_features} features -> {args.out}")
    else:
        if args.command == "evaluate":
            reports = cmd_evaluate(read_dataset(args.dataset), cfg)
            write_reports(reports, cfg, args.out_dir, not args.no_figures)
        else:
            reports = cmd_run(cfg, args.out_dir, args.dataset, args.wav_dir, args.labels,
                              args.skip_bad, args.jobs, not args.no_figures)
        for line in summary_lines(reports):
            print(line)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (PipelineError, ConfigError, AudioError, DatasetError, OSError,
            classifiers.DimensionError, ValueError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
