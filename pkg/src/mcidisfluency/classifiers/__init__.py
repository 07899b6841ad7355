"""k-NN, linear SVM, MLP and CNN behind one train/predict interface."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .knn import knn_predict
from .nn import CNN, MLP, DivergenceError, grid_side, reshape_to_grid, train_gd
from .nn import gradient_check as _net_gradient_check
from .svm import LinearSVM, SMOConvergenceError, kkt_violations, smo_train

KINDS = ("knn", "svm", "mlp", "cnn", "majority")

__all__ = [
    "KINDS", "ClassifierSpec", "TrainedModel", "train", "predict", "predict_many",
    "save_model", "load_model", "gradient_check", "reshape_to_grid", "cnn_forward",
    "DimensionError", "DivergenceError", "SMOConvergenceError", "kkt_violations",
]


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "svm"
    knn_k: int = 1
    svm_c: float = 1.0
    svm_tol: float = 1e-3
    svm_max_iters: int = 100_000
    mlp_hidden: tuple[int, ...] = (100, 100)
    mlp_lr: float = 1.0
    mlp_epochs: int = 500
    mlp_seed: int = 0
    cnn_filters: int = 20
    cnn_conv: int = 3
    cnn_pool: int = 2
    cnn_dense: tuple[int, ...] = (20,)
    cnn_lr: float = 1.0
    cnn_epochs: int = 1500
    cnn_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        object.__setattr__(self, "mlp_hidden", tuple(int(h) for h in self.mlp_hidden))
        object.__setattr__(self, "cnn_dense", tuple(int(h) for h in self.cnn_dense))
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not isinstance(v, bool) and f.name not in (
                    "mlp_seed", "cnn_seed") and v <= 0:
                raise ValueError(f"{f.name} must be positive")
            if isinstance(v, tuple) and any(h <= 0 for h in v):
                raise ValueError(f"{f.name} entries must be positive")

    @property
    def label(self) -> str:
        if self.kind == "knn":
            return f"k-NN (k={self.knn_k})"
        if self.kind == "svm":
            return f"SVM (C={self.svm_c:g})"
        if self.kind == "mlp":
            return f"MLP ({len(self.mlp_hidden)}x{self.mlp_hidden[0]})" if self.mlp_hidden else "MLP (0)"
        if self.kind == "cnn":
            c, p = self.cnn_conv, self.cnn_pool
            return f"CNN ({self.cnn_filters}f {c}x{c}, pool {p}x{p})"
        return "majority"

    def with_(self, **kw) -> "ClassifierSpec":
        return replace(self, **kw)


@dataclass
class TrainedModel:
    kind: str
    spec: ClassifierSpec
    n_features: int
    classes: tuple[str, ...]
    params: dict[str, np.ndarray] = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list, repr=False)


def _build_net(spec: ClassifierSpec, n_features: int, params=None):
    if spec.kind == "mlp":
        return MLP(n_features, spec.mlp_hidden, 2, spec.mlp_seed, params)
    return CNN(grid_side(n_features), spec.cnn_filters, spec.cnn_conv, spec.cnn_pool,
               spec.cnn_dense, 2, spec.cnn_seed, params)


def _net_params(model: TrainedModel) -> list[np.ndarray]:
    return [model.params[f"p{i}"] for i in range(len(model.params))]


def _net_input(kind, X):
    return reshape_to_grid(X) if kind == "cnn" else X


def train(spec: ClassifierSpec, X, y=None, classes=("CR", "MCI")) -> TrainedModel:
    """Fit a classifier to ``X`` (features in [0, 1]) and integer labels ``y``.

    ``X`` may also be a :class:`~mcidisfluency.assembly.Dataset`, in which
    case ``y`` is ignored.
    """
    if hasattr(X, "X") and hasattr(X, "y"):
        ds = X
        X, y, classes = ds.X, ds.y, ds.classes
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size or y.size < 2:
        raise ValueError("need a 2-D feature matrix with at least two labelled rows")
    d = X.shape[1]
    model = TrainedModel(spec.kind, spec, d, tuple(classes))
    if spec.kind == "knn":
        model.params = {"X": X.copy(), "y": y.copy()}
    elif spec.kind == "majority":
        counts = np.bincount(y, minlength=2)
        model.params = {"label": np.array([int(np.argmax(counts))])}
    elif spec.kind == "svm":
        svm = smo_train(X, np.where(y == 1, 1.0, -1.0), spec.svm_c, spec.svm_tol, spec.svm_max_iters)
        model.params = {"w": svm.w, "b": np.array([svm.b]), "alpha": svm.alpha,
                        "iterations": np.array([svm.iterations])}
    else:
        net = _build_net(spec, d)
        lr, epochs = (spec.mlp_lr, spec.mlp_epochs) if spec.kind == "mlp" else (spec.cnn_lr, spec.cnn_epochs)
        history = train_gd(net, _net_input(spec.kind, X), y, lr, epochs)
        model.params = {f"p{i}": p for i, p in enumerate(net.params)}
        model.loss_history = history
    return model


def decision_scores(model: TrainedModel, X) -> np.ndarray:
    """Probability (or margin, for SVM) of the second class."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if model.kind == "svm":
        return X @ model.params["w"] + model.params["b"][0]
    if model.kind in ("mlp", "cnn"):
        net = _build_net(model.spec, model.n_features, _net_params(model))
        return net.forward(_net_input(model.kind, X))[:, 1]
    raise ValueError(f"{model.kind} has no continuous score")


def predict_many(model: TrainedModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise DimensionError(f"model expects {model.n_features} features, got {X.shape[1]}")
    if model.kind == "knn":
        return knn_predict(model.params["X"], model.params["y"], X, model.spec.knn_k)
    if model.kind == "majority":
        return np.full(X.shape[0], int(model.params["label"][0]), dtype=np.int64)
    if model.kind == "svm":
        return (decision_scores(model, X) > 0).astype(np.int64)
    net = _build_net(model.spec, model.n_features, _net_params(model))
    return np.argmax(net.forward(_net_input(model.kind, X)), axis=1).astype(np.int64)


def predict(model: TrainedModel, x) -> str:
    """Class name for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("predict takes one feature vector; use predict_many for batches")
    return model.classes[int(predict_many(model, x[None, :])[0])]


def cnn_forward(model: TrainedModel, grid) -> np.ndarray:
    """Class probabilities for one grid (or a batch of grids)."""
    if model.kind != "cnn":
        raise ValueError("not a CNN model")
    net = _build_net(model.spec, model.n_features, _net_params(model))
    grid = np.asarray(grid, dtype=np.float64)
    if grid.shape[-1] != net.side or grid.shape[-2] != net.side:
        raise DimensionError(f"expected a {net.side}x{net.side} grid")
    return net.forward(grid)


def gradient_check(spec: ClassifierSpec, X, y, h: float = 1e-5) -> float:
    """Worst relative error of backprop against central differences at the seeded init."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if spec.kind not in ("mlp", "cnn"):
        raise ValueError("gradient_check applies to mlp and cnn")
    net = _build_net(spec, X.shape[1])
    n_params = sum(p.size for p in net.params)
    if n_params > 200:
        raise ValueError(f"{n_params} parameters; gradient_check is meant for <= 200")
    return _net_gradient_check(net, _net_input(spec.kind, X), y, h)


def save_model(model: TrainedModel, path, meta: dict | None = None) -> None:
    """JSON with kind, spec, dimensions and parameters (floats round-trip exactly).

    ``meta`` (e.g. the config hash and feature names) is stored verbatim.
    """
    spec = asdict(model.spec)
    doc = {
        "kind": model.kind,
        "spec": {k: list(v) if isinstance(v, tuple) else v for k, v in spec.items()},
        "n_features": model.n_features,
        "classes": list(model.classes),
        "params": {k: {"shape": list(v.shape), "dtype": str(v.dtype), "data": v.ravel().tolist()}
                   for k, v in model.params.items()},
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path) -> TrainedModel:
    doc = json.loads(Path(path).read_text())
    spec = ClassifierSpec(**doc["spec"])
    params = {k: np.asarray(v["data"], dtype=v["dtype"]).reshape(v["shape"])
              for k, v in doc["params"].items()}
    return TrainedModel(doc["kind"], spec, int(doc["n_features"]), tuple(doc["classes"]), params)
