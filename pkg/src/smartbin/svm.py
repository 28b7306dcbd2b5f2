"""Binary margin classifier: soft-margin SVM with linear, polynomial and RBF kernels.

The primal objective is ``0.5 * ||w||^2 + C * sum(max(0, 1 - y_i * f(x_i)))``; the
hard-margin problem is its large-``C`` limit on separable data. Two solvers are
provided: an SMO-style dual solver (default, any kernel) and a Pegasos-style
stochastic subgradient solver for the linear primal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

KERNEL_KINDS = ("linear", "polynomial", "rbf")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    degree: int = 3
    coef0: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNEL_KINDS}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError("rbf gamma must be > 0")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError("polynomial degree must be an integer >= 1")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear")

    @classmethod
    def polynomial(cls, degree: int = 3, coef0: float = 1.0) -> "KernelSpec":
        return cls("polynomial", degree=degree, coef0=coef0)

    @classmethod
    def rbf(cls, gamma: float = 1.0) -> "KernelSpec":
        return cls("rbf", gamma=gamma)

    def to_dict(self) -> dict:
        if self.kind == "linear":
            return {"kind": "linear"}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "degree": self.degree, "coef0": self.coef0}
        return {"kind": "rbf", "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(**d)


@dataclass(frozen=True)
class LabeledExample:
    x: tuple[float, ...]
    y: int

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.ravel(self.x)))
        if self.y not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.y!r}")
        if not all(math.isfinite(v) for v in self.x):
            raise ValueError("non-finite feature value")


def as_examples(X, y) -> list[LabeledExample]:
    return [LabeledExample(tuple(row), int(label)) for row, label in zip(np.atleast_2d(X), y)]


@dataclass
class TrainConfig:
    solver: str = "smo"
    max_epochs: int = 200
    tol: float = 1e-6  # relative objective change between epochs (sgd)
    kkt_tol: float = 1e-9  # maximal-violating-pair gap (smo)
    max_iter: int = 1_000_000
    seed: int = 0


@dataclass(frozen=True)
class TrainingDiagnostics:
    objective: float
    iterations: int
    history: tuple[float, ...] = ()


@dataclass(frozen=True)
class SvmModel:
    kernel: KernelSpec
    C: float
    b: float
    support_x: np.ndarray
    support_y: np.ndarray
    alpha: np.ndarray
    w: np.ndarray | None = None
    diagnostics: TrainingDiagnostics = field(default_factory=lambda: TrainingDiagnostics(math.nan, 0))

    @property
    def dim(self) -> int:
        if self.w is not None:
            return self.w.shape[0]
        return self.support_x.shape[1]

    @property
    def support_vectors(self) -> list[tuple[LabeledExample, float]]:
        return [
            (LabeledExample(tuple(x), int(y)), float(a))
            for x, y, a in zip(self.support_x, self.support_y, self.alpha)
        ]

    def weight_from_support(self) -> np.ndarray:
        """``sum_i alpha_i y_i x_i``; only meaningful for the linear kernel."""
        if len(self.alpha) == 0:
            return np.zeros(self.dim)
        return (self.alpha * self.support_y) @ self.support_x

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "w": None if self.w is None else self.w.tolist(),
            "b": self.b,
            "support_vectors": [
                {"x": x.tolist(), "y": int(y), "alpha": float(a)}
                for x, y, a in zip(self.support_x, self.support_y, self.alpha)
            ],
            "diagnostics": {
                "objective": self.diagnostics.objective,
                "iterations": self.diagnostics.iterations,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        kernel = KernelSpec.from_dict(d["kernel"])
        svs = d.get("support_vectors", [])
        w = None if d.get("w") is None else np.asarray(d["w"], dtype=float)
        dim = len(svs[0]["x"]) if svs else (0 if w is None else len(w))
        diag = d.get("diagnostics", {})
        return cls(
            kernel=kernel,
            C=float(d["C"]),
            b=float(d["b"]),
            support_x=np.asarray([sv["x"] for sv in svs], dtype=float).reshape(len(svs), dim),
            support_y=np.asarray([sv["y"] for sv in svs], dtype=float),
            alpha=np.asarray([sv["alpha"] for sv in svs], dtype=float),
            w=w,
            diagnostics=TrainingDiagnostics(float(diag.get("objective", math.nan)), int(diag.get("iterations", 0))),
        )


def save_model(model: SvmModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> SvmModel:
    return SvmModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def kernel_matrix(kernel: KernelSpec, A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if kernel.kind == "linear":
        return A @ B.T
    if kernel.kind == "polynomial":
        return (A @ B.T + kernel.coef0) ** kernel.degree
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-kernel.gamma * np.maximum(sq, 0.0))


def kernel_eval(kernel: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if kernel.kind == "linear":
        return float(a @ b)
    if kernel.kind == "polynomial":
        return float((a @ b + kernel.coef0) ** kernel.degree)
    d = a - b
    return float(np.exp(-kernel.gamma * (d @ d)))


def _check_dim(model: SvmModel, X: np.ndarray) -> None:
    if X.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: model expects {model.dim}, got {X.shape[1]}")


def decision_function(model: SvmModel, X) -> np.ndarray:
    """Vectorised decision values for the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_dim(model, X)
    if model.w is not None:
        return X @ model.w + model.b
    if len(model.alpha) == 0:
        return np.full(X.shape[0], model.b)
    K = kernel_matrix(model.kernel, model.support_x, X)
    return (model.alpha * model.support_y) @ K + model.b


def decision_value(model: SvmModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("decision_value takes a single feature vector")
    return float(decision_function(model, x[None, :])[0])


def predict(model: SvmModel, x) -> int:
    """Sign of the decision value; an exact zero maps to +1."""
    return 1 if decision_value(model, x) >= 0.0 else -1


def predict_many(model: SvmModel, X) -> np.ndarray:
    return np.where(decision_function(model, X) >= 0.0, 1, -1)


def _as_arrays(data: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    if len(data) == 0:
        raise ValueError("no training data")
    dims = {len(ex.x) for ex in data}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch among examples: {sorted(dims)}")
    X = np.array([ex.x for ex in data], dtype=float)
    y = np.array([ex.y for ex in data], dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature value")
    return X, y


def hinge_objective(model: SvmModel, data: Sequence[LabeledExample], C: float | None = None) -> float:
    """``0.5 * ||w||^2 + C * sum(hinge)``; for kernel models ``||w||`` is the RKHS norm."""
    X, y = _as_arrays(data)
    C = model.C if C is None else C
    if model.w is not None:
        reg = 0.5 * float(model.w @ model.w)
    elif len(model.alpha):
        ay = model.alpha * model.support_y
        reg = 0.5 * float(ay @ kernel_matrix(model.kernel, model.support_x, model.support_x) @ ay)
    else:
        reg = 0.0
    margins = y * decision_function(model, X)
    return reg + C * float(np.maximum(0.0, 1.0 - margins).sum())


def train(
    data: Sequence[LabeledExample],
    kernel: KernelSpec | None = None,
    C: float = 1.0,
    config: TrainConfig | None = None,
) -> SvmModel:
    kernel = kernel or KernelSpec.linear()
    config = config or TrainConfig()
    if not C > 0 or not math.isfinite(C):
        raise ValueError("C must be a positive finite number")
    X, y = _as_arrays(data)
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training data must contain both labels")
    if config.solver == "smo":
        model = _train_smo(X, y, kernel, C, config)
    elif config.solver == "sgd":
        if kernel.kind != "linear":
            raise ValueError("the sgd solver supports the linear kernel only")
        model = _train_sgd(X, y, C, config)
    else:
        raise ValueError(f"unknown solver {config.solver!r}")
    return model


def _train_smo(X, y, kernel, C, config) -> SvmModel:
    # Dual: min 0.5 a'Qa - e'a  s.t. y'a = 0, 0 <= a <= C, with Q_ij = y_i y_j K_ij.
    # Working pair by second-order selection (Fan, Chen & Lin 2005).
    n = len(y)
    K = kernel_matrix(kernel, X, X)
    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    tau = 1e-12
    it = 0
    while it < config.max_iter:
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        i = int(np.argmax(np.where(up, yG, -np.inf)))
        m = yG[i]
        M = np.min(np.where(low, yG, np.inf))
        if m - M < config.kkt_tol:
            break
        cand = low & (yG < m)
        bgap = m - yG
        a = np.maximum(diag[i] + diag - 2.0 * K[i], tau)
        j = int(np.argmin(np.where(cand, -(bgap * bgap) / a, np.inf)))
        # move alpha_i += y_i t, alpha_j -= y_j t along the equality constraint
        t = bgap[j] / a[j]
        t = min(t, C - alpha[i] if y[i] > 0 else alpha[i])
        t = min(t, alpha[j] if y[j] > 0 else C - alpha[j])
        di, dj = y[i] * t, -y[j] * t
        alpha[i] = min(max(alpha[i] + di, 0.0), C)
        alpha[j] = min(max(alpha[j] + dj, 0.0), C)
        G += Q[:, i] * di + Q[:, j] * dj
        it += 1

    b = -_rho(alpha, y, G, C)
    sv = alpha > 0
    w = (alpha * y) @ X if kernel.kind == "linear" else None
    model = SvmModel(kernel, C, b, X[sv].copy(), y[sv].copy(), alpha[sv].copy(), w)
    obj = hinge_objective(model, as_examples(X, y.astype(int)))
    return SvmModel(kernel, C, b, model.support_x, model.support_y, model.alpha, w,
                    TrainingDiagnostics(obj, it, (obj,)))


def _rho(alpha, y, G, C) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(yG[free].mean())
    at_upper = alpha >= C
    ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lb_mask = ~ub_mask
    ub = yG[ub_mask].min() if np.any(ub_mask) else np.inf
    lb = yG[lb_mask].max() if np.any(lb_mask) else -np.inf
    return float((ub + lb) / 2)


def _primal(w, b, X, y, C) -> float:
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - y * (X @ w + b)).sum())


def _train_sgd(X, y, C, config) -> SvmModel:
    """Pegasos on the primal with step 1/(lambda t), lambda = 1/(C m).

    ``w`` is tracked through its expansion ``sum_i c_i y_i x_i`` so the returned
    model keeps dual coefficients. Candidates each epoch are the end-of-epoch
    iterate and the running average of end-of-epoch iterates; the best one by
    primal objective is kept, so the reported history is non-increasing.
    """
    m, d = X.shape
    lam = 1.0 / (C * m)
    rng = np.random.default_rng(config.seed)
    coef = np.zeros(m)
    b = 0.0
    t = 0
    coef_avg = np.zeros(m)
    b_avg = 0.0
    best_obj, best_coef, best_b = _primal(np.zeros(d), 0.0, X, y, C), np.zeros(m), 0.0
    history = [best_obj]
    prev = best_obj
    epochs = 0
    for epochs in range(1, config.max_epochs + 1):
        for i in rng.permutation(m):
            t += 1
            eta = 1.0 / (lam * t)
            w = (coef * y) @ X
            viol = y[i] * (X[i] @ w + b) < 1.0
            coef *= 1.0 - eta * lam
            if viol:
                coef[i] += eta
                b += eta * y[i]
        coef_avg += (coef - coef_avg) / epochs
        b_avg += (b - b_avg) / epochs
        objs = []
        for cand_coef, cand_b in ((coef, b), (coef_avg, b_avg)):
            objs.append(_primal((cand_coef * y) @ X, cand_b, X, y, C))
            if objs[-1] < best_obj:
                best_obj, best_coef, best_b = objs[-1], cand_coef.copy(), cand_b
        history.append(best_obj)
        if epochs > 1 and abs(prev - objs[1]) <= config.tol * max(abs(prev), 1e-12):
            break
        prev = objs[1]

    sv = best_coef > 0
    w = (best_coef * y) @ X
    return SvmModel(KernelSpec.linear(), C, float(best_b), X[sv].copy(), y[sv].copy(),
                    np.minimum(best_coef[sv], C), w, TrainingDiagnostics(best_obj, epochs, tuple(history)))


def accuracy(model: SvmModel, data: Iterable[LabeledExample]) -> float:
    X, y = _as_arrays(list(data))
    return float(np.mean(predict_many(model, X) == y))
