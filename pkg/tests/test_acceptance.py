"""Acceptance criteria; one PASS/FAIL line each in the terminal summary."""

import itertools
import json
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcidisfluency.assembly import Dataset, feature_names
from mcidisfluency.audio_io import AudioSignal, frame
from mcidisfluency.classical import formant_track, frame_descriptors, perturbation, pitch_track
from mcidisfluency.classifiers import ClassifierSpec, gradient_check, kkt_violations, predict_many, train
from mcidisfluency.classifiers.nn import CNN
from mcidisfluency.classifiers.svm import smo_train
from mcidisfluency.cli import main
from mcidisfluency.evaluation import cross_validate, stratified_kfold
from mcidisfluency.nonlinear import higuchi_fd, permutation_entropy, shannon_entropy
from mcidisfluency.perceptual import mfcc
from mcidisfluency.selection import NoFeaturesSurviveError, fit_preprocess, mann_whitney_u, u_test_filter
from signals import RATE, sawtooth, sine, vowel


def enumerated_p(a, b):
    """Two-sided exact p from every split of ranks 1..n (tie-free samples)."""
    n_a, n = len(a), len(a) + len(b)
    order = np.argsort(np.concatenate([a, b]), kind="stable")
    ranks = np.empty(n)
    ranks[order] = np.arange(1, n + 1)
    u_obs = ranks[:n_a].sum() - n_a * (n_a + 1) / 2
    u_obs = min(u_obs, n_a * (n - n_a) - u_obs)
    combos = np.array(list(itertools.combinations(range(1, n + 1), n_a)))
    u = combos.sum(axis=1) - n_a * (n_a + 1) / 2
    return float(np.mean(np.minimum(u, n_a * (n - n_a) - u) <= u_obs))


def ranks_with_u(u, n=8):
    """Ranks of an n-sample group (out of 2n) whose U statistic is exactly ``u``."""
    r = list(range(1, n + 1))
    for _ in range(u):
        for i in reversed(range(n)):
            if r[i] + 1 <= 2 * n and r[i] + 1 not in r:
                r[i] += 1
                break
    return r


@pytest.mark.criterion("statistical oracle: exact U vs enumeration (500 instances), normal approx at 8/8, < 10 s")
def test_statistical_oracle():
    rng = np.random.default_rng(2024)
    worst_exact = 0.0
    elapsed = 0.0
    for _ in range(500):
        n_a, n_b = (int(v) for v in rng.integers(1, 9, 2))
        a, b = rng.standard_normal(n_a), rng.standard_normal(n_b)
        t0 = time.perf_counter()
        p = mann_whitney_u(a, b, "exact").p_value
        elapsed += time.perf_counter() - t0
        worst_exact = max(worst_exact, abs(p - enumerated_p(a, b)))
    worst_normal = 0.0
    for u in range(65):
        ra = ranks_with_u(u)
        a = np.array(ra, dtype=float)
        b = np.array([r for r in range(1, 17) if r not in ra], dtype=float)
        r = mann_whitney_u(a, b, "normal")
        assert min(u, 64 - u) == r.u
        worst_normal = max(worst_normal, abs(r.p_value - enumerated_p(a, b)))
    print(f"exact max|dp|={worst_exact:.2e} normal max|dp|={worst_normal:.4f} time={elapsed:.2f}s")
    assert worst_exact <= 1e-12
    assert worst_normal <= 0.01
    assert elapsed < 10.0


@pytest.mark.criterion("non-linear estimators: Higuchi line/noise, PE ramp/noise, 8-bin Shannon")
def test_nonlinear_estimators():
    fd_line = higuchi_fd(np.arange(1000.0))
    fd_noise = higuchi_fd(np.random.default_rng(0).standard_normal(10_000))
    pe_ramp = permutation_entropy(np.arange(1000.0), 3)
    pe_noise = permutation_entropy(np.random.default_rng(1).uniform(size=10_000), 3)
    h8 = shannon_entropy(np.repeat(np.arange(8.0), 50), n_bins=8)
    print(f"FD line={fd_line:.4f} noise={fd_noise:.4f} PE ramp={pe_ramp} noise={pe_noise:.5f} H8={h8}")
    assert abs(fd_line - 1.0) <= 0.05
    assert abs(fd_noise - 2.0) <= 0.1
    assert pe_ramp == 0.0
    assert pe_noise >= 0.998
    assert h8 == 3.0


@pytest.mark.criterion("DSP: pitch, centroid, formants, MFCC gain invariance, jitter/shimmer")
def test_dsp_checks():
    f0 = pitch_track(frame(sine(220, 1.0))).f0
    pitch_err = float(np.max(np.abs(f0 - 220.0)))

    x = sine(1000, 551 / RATE).samples
    centroid_err_bins = abs(frame_descriptors(x, RATE)["spectral_centroid"] - 1000.0) / (RATE / len(x))

    fs = frame(AudioSignal(vowel(1.0, f0=120), RATE))
    ft = formant_track(fs, voiced=pitch_track(fs).voiced)
    formant_err = max(abs(float(np.mean(got)) - want)
                      for got, want in zip((ft.f1, ft.f2, ft.f3), (700, 1220, 2600)))

    rng = np.random.default_rng(3)
    speechy = AudioSignal(vowel(1.0, f0=130) + 0.01 * rng.standard_normal(RATE), RATE)
    base = mfcc(frame(speechy)).values
    mfcc_err = 0.0
    for g in (0.05, 0.3, 1.5):
        scaled = mfcc(frame(AudioSignal(g * speechy.samples, RATE))).values
        mfcc_err = max(mfcc_err, float(np.max(np.abs(scaled[:, 1:13] - base[:, 1:13]))))

    periodic = AudioSignal(sawtooth(147, 150), RATE)
    pert = perturbation(periodic, pitch_track(frame(periodic)))
    print(f"pitch err={pitch_err:.3f} Hz centroid err={centroid_err_bins:.3f} bins "
          f"formant err={formant_err:.1f} Hz mfcc err={mfcc_err:.2e} "
          f"jitter={pert['jitter_local']:.2e} shimmer={pert['shimmer_local']:.2e}")
    assert pitch_err <= 2.0
    assert centroid_err_bins <= 1.0
    assert formant_err <= 60.0
    assert mfcc_err <= 1e-6
    assert pert["jitter_local"] < 1e-6 and pert["shimmer_local"] < 1e-6


@pytest.mark.criterion("learning: MLP/CNN gradient checks, SVM separable fit + KKT, CNN 9x9 shape chain")
def test_learning_checks():
    rng = np.random.default_rng(0)
    mlp_err = gradient_check(ClassifierSpec("mlp", mlp_hidden=(3, 2)),
                             rng.uniform(size=(5, 4)), rng.integers(0, 2, 5))
    cnn_err = gradient_check(ClassifierSpec("cnn", cnn_filters=2, cnn_dense=(3,)),
                             rng.uniform(size=(4, 25)), np.array([0, 1, 0, 1]))

    y = np.repeat([0, 1], 20)
    X = rng.standard_normal((40, 2)) * 0.3 + np.where(y[:, None] == 1, 2.0, -2.0)
    model = train(ClassifierSpec("svm"), X, y)
    train_cer = 100.0 * float(np.mean(predict_many(model, X) != y))
    ys = np.where(y == 1, 1.0, -1.0)
    kkt = float(np.max(kkt_violations(smo_train(X, ys, 1.0), X, ys, 1.0)))

    shapes = CNN(9).shapes()
    print(f"grad rel err mlp={mlp_err:.2e} cnn={cnn_err:.2e} svm train CER={train_cer} "
          f"KKT={kkt:.2e} shapes={shapes}")
    assert mlp_err < 1e-4 and cnn_err < 1e-4
    assert train_cer == 0.0
    assert kkt <= 1e-3
    assert shapes == [(7, 7, 20), (3, 3, 20), (180,), (20,), (2,)]


def _noise_dataset(X, y):
    labels = ["MCI" if v else "CR" for v in y]
    return Dataset(X, [f"f{j}" for j in range(X.shape[1])], labels, [f"r{i}" for i in range(len(y))])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200), st.integers(6, 30), st.floats(0.0, 2.0))
def _funnel_property(seed, d, n, shift):
    rng = np.random.default_rng(seed)
    y = np.arange(2 * n) % 2
    X = rng.standard_normal((2 * n, d)) + shift * y[:, None] * (rng.random(d) < 0.3)
    try:
        rep = fit_preprocess(_noise_dataset(X, y), alpha=0.1, k=80).report
    except NoFeaturesSurviveError:
        return
    assert rep.n_initial == d
    assert rep.n_initial >= rep.n_utest >= rep.n_final
    assert rep.n_final == min(80, rep.n_utest)


@pytest.mark.criterion("pipeline funnel: D_initial >= D_utest >= D_final; 1000 noise features keep 100 +- 30")
def test_funnel_fidelity():
    _funnel_property()
    rng = np.random.default_rng(7)
    y = np.repeat([0, 1], 30)
    _, rep = u_test_filter(_noise_dataset(rng.standard_normal((60, 1000)), y), 0.1)
    print(f"noise features kept: {rep.n_utest} of 1000")
    assert 70 <= rep.n_utest <= 130


def _run_corpus(root):
    wavs = root / "wavs"
    assert main(["synth", str(wavs), "--n-per-class", "30", "--duration", "3", "--seed", "0"]) == 0
    t0 = time.perf_counter()
    rc = main(["run", "--wav-dir", str(wavs), "--labels", str(wavs / "labels.csv"), "-o", str(root / "out")])
    return rc, time.perf_counter() - t0


@pytest.fixture(scope="session")
def e2e(tmp_path_factory):
    first, second = tmp_path_factory.mktemp("e2e_a"), tmp_path_factory.mktemp("e2e_b")
    rc1, t1 = _run_corpus(first)
    rc2, t2 = _run_corpus(second)
    return first / "out", second / "out", (rc1, rc2), (t1, t2)


@pytest.mark.criterion("end-to-end: 30+30 synthetic corpus, 10-fold CV, CER <= 10% x4, < 10 min, bit-identical rerun")
def test_end_to_end(e2e):
    out_a, out_b, rcs, times = e2e
    assert rcs == (0, 0)
    doc = json.loads((out_a / "report.json").read_text())
    cers = {c["classifier"]: c["overall_cer"] for c in doc["classifiers"]}
    print(f"CER {cers}; runtime {times[0]:.0f}s / {times[1]:.0f}s; funnel {doc['funnel']}")
    assert len(cers) == 4
    assert all(c["k"] == 10 for c in doc["classifiers"])
    assert all(v <= 10.0 for v in cers.values())
    assert max(times) < 600
    for name in ("report.json", "report.csv", "dataset.csv", "selection.csv", "cer.png", "funnel.png"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name
    f = doc["funnel"]
    assert f["d_initial"] == len(feature_names()) >= f["d_utest"] >= f["d_final"]


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 80), st.integers(10, 80), st.integers(2, 10), st.integers(0, 2**31))
def _partition_property(n0, n1, k, seed):
    labels = np.array(["CR"] * n0 + ["MCI"] * n1)
    folds = stratified_kfold(labels, k, seed)
    assert np.array_equal(np.sort(np.unique(folds)), np.arange(k))
    assert folds.shape == labels.shape  # each sample in exactly one test fold
    for c, n_c in (("CR", n0), ("MCI", n1)):
        per = np.bincount(folds[labels == c], minlength=k)
        assert per.max() - per.min() <= 1
        assert np.all(np.abs(per - n_c / k) < 1)


@pytest.mark.criterion("cross-validation: exact stratified partition, per-fold balance, majority CER 40.0 on 60/40")
def test_cross_validation():
    _partition_property()
    rng = np.random.default_rng(0)
    y = np.array([0] * 60 + [1] * 40)
    r = cross_validate(_noise_dataset(rng.standard_normal((100, 5)), y), ClassifierSpec("majority"),
                       k=10, select=False)
    print(f"majority CER={r.overall_cer}")
    assert r.overall_cer == 40.0
