import pytest

from mcidisfluency.config import ConfigError, PipelineConfig, load_config, parse_flat


def test_defaults():
    cfg = PipelineConfig()
    assert cfg.selection.alpha == 0.1 and cfg.selection.k == 80
    assert cfg.cv.k == 10 and cfg.cv.global_preprocess is False
    assert cfg.classifiers == ("knn", "svm", "mlp", "cnn")
    assert [s.kind for s in cfg.specs()] == ["knn", "svm", "mlp", "cnn"]
    assert cfg.audio.rate == 22050


def test_flat_text_roundtrip(tmp_path):
    cfg = PipelineConfig().override({"selection.k": "40", "cv.seed": "7", "classifier.mlp_hidden": "8,4"})
    p = tmp_path / "c.cfg"
    p.write_text(cfg.to_text())
    back = load_config(p)
    assert back == cfg
    assert back.hash() == cfg.hash()
    assert back.classifier.mlp_hidden == (8, 4)


def test_hash_tracks_every_change():
    base = PipelineConfig()
    assert base.hash() == PipelineConfig().hash()
    assert len(base.hash()) == 16
    changed = {base.override({k: v}).hash() for k, v in [
        ("cv.seed", "1"), ("cv.global_preprocess", "true"), ("selection.alpha", "0.05"),
        ("vad.energy_threshold_factor", "2.5"), ("classifiers", "knn,svm")]}
    assert len(changed) == 5 and base.hash() not in changed


def test_precedence_file_then_overrides(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\ncv.seed = 3\nselection.k = 20  # trailing\n\n")
    cfg = load_config(p, {"cv.seed": "5"})
    assert cfg.cv.seed == 5 and cfg.selection.k == 20


@pytest.mark.parametrize("flat", [
    {"nosuch.key": "1"}, {"cv.nosuch": "1"}, {"cv.k": "ten"}, {"cv.global_preprocess": "maybe"},
    {"classifiers": "knn,tree"}, {"classifier.kind": "svm"}, {"seed": "1"},
])
def test_bad_overrides(flat):
    with pytest.raises(ConfigError):
        PipelineConfig().override(flat)


def test_parse_flat_errors():
    assert parse_flat("a.b = 1\n") == {"a.b": "1"}
    with pytest.raises(ConfigError, match="line 2"):
        parse_flat("a.b = 1\nnonsense\n")
