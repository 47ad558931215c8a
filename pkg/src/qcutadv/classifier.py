"""Variational K-class classifier on amplitude-encoded inputs.

The circuit has ``d`` data qubits on top and ``d_a = ceil(log2 K)`` ancillas at
the bottom, all ancillas start in ``|0>`` and the class is read from the
ancilla register. Each layer is a ``ROT`` on every qubit followed by a cyclic
ring of CNOTs ``(0,1), (1,2), ..., (d+ - 1, 0)``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import qmath
from .circuit import CircuitIR, Gate, adjoint_gradient, parameter_shift_gradient, povm_probabilities, simulate

PROB_FLOOR = 1e-12


@dataclass
class ClassifierModel:
    d: int
    n_classes: int
    layers: int
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.n_classes < 2 or not qmath.is_power_of_two(self.n_classes):
            raise ValueError("number of classes must be a power of two >= 2")
        if self.theta.shape != (self.layers, self.d_plus, 3):
            raise ValueError(f"theta must have shape {(self.layers, self.d_plus, 3)}, got {self.theta.shape}")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")

    @property
    def d_a(self) -> int:
        return math.ceil(math.log2(self.n_classes))

    @property
    def d_plus(self) -> int:
        return self.d + self.d_a

    @property
    def readout(self) -> tuple[int, ...]:
        return tuple(range(self.d, self.d_plus))

    @classmethod
    def initialise(cls, d: int, n_classes: int, layers: int, seed: int) -> ClassifierModel:
        d_a = math.ceil(math.log2(n_classes))
        theta = qmath.rng_for(seed, 0).uniform(0, 2 * np.pi, size=(layers, d + d_a, 3))
        return cls(d, n_classes, layers, theta)

    def copy(self) -> ClassifierModel:
        return ClassifierModel(self.d, self.n_classes, self.layers, self.theta.copy())


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    split: np.ndarray | None = None  # "train"/"test" per sample

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (N, F) with one label per row")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if np.any(np.linalg.norm(self.features, axis=1) == 0):
            raise ValueError("every sample needs a nonzero feature vector")
        if self.split is None:
            self.split = np.array(["train"] * len(self.labels))
        self.split = np.asarray(self.split)

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, tag: str) -> LabeledDataset:
        mask = self.split == tag
        return LabeledDataset(self.features[mask], self.labels[mask], self.split[mask])

    def train(self) -> LabeledDataset:
        return self.subset("train")

    def test(self) -> LabeledDataset:
        return self.subset("test")


def amplitude_encode(x, d: int) -> np.ndarray:
    """Zero-pad to ``2**d`` entries and L2-normalise; works on a single vector or rows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    if xs.shape[1] > 2**d:
        raise ValueError(f"{xs.shape[1]} features do not fit in {d} qubits")
    norms = np.linalg.norm(xs, axis=1)
    if np.any(norms == 0):
        raise ValueError("cannot encode an all-zero vector")
    out = np.zeros((xs.shape[0], 2**d), dtype=complex)
    out[:, : xs.shape[1]] = xs / norms[:, None]
    return out[0] if single else out


def with_ancillas(states: np.ndarray, d_a: int) -> np.ndarray:
    """``|psi> ⊗ |0...0>`` for the ancilla register at the bottom."""
    st = np.atleast_2d(states)
    out = np.zeros((st.shape[0], st.shape[1], 2**d_a), dtype=complex)
    out[:, :, 0] = st
    out = out.reshape(st.shape[0], -1)
    return out[0] if np.ndim(states) == 1 else out


def entangler_ring(width: int) -> list[Gate]:
    return [Gate("CNOT", (i, (i + 1) % width)) for i in range(width)]


def layer_gates(theta_layer: np.ndarray, tag: str = "clf") -> list[Gate]:
    width = theta_layer.shape[0]
    return [Gate("ROT", (q,), tuple(theta_layer[q]), tag=tag) for q in range(width)] + entangler_ring(width)


def build_ansatz(model: ClassifierModel) -> CircuitIR:
    if model.d_plus < 2:
        raise ValueError("the ansatz needs at least two qubits")
    if model.layers < 1:
        raise ValueError("the ansatz needs at least one layer")
    gates: list[Gate] = []
    bounds = [0]
    for layer in range(model.layers):
        gates += layer_gates(model.theta[layer])
        bounds.append(len(gates))
    return CircuitIR(model.d_plus, gates, bounds)


def input_states(model: ClassifierModel, features) -> np.ndarray:
    return with_ancillas(amplitude_encode(np.atleast_2d(features), model.d), model.d_a)


def circuit_probs(circuit: CircuitIR, readout, states) -> np.ndarray:
    return povm_probabilities(simulate(circuit, states), readout, circuit.width)


def predict_probs(model: ClassifierModel, x) -> np.ndarray:
    """Exact class probabilities ``Tr(Pi_k E(sigma ⊗ |0><0|))``; rows for 2-D input."""
    probs = circuit_probs(build_ansatz(model), model.readout, input_states(model, x))
    return probs[0] if np.ndim(x) == 1 else probs


def predict(model: ClassifierModel, x) -> np.ndarray:
    return np.argmax(predict_probs(model, np.atleast_2d(x)), axis=1)


def cross_entropy(probs, label) -> float:
    return float(-np.log(max(float(np.asarray(probs)[label]), PROB_FLOOR)))


def batch_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    p = probs[np.arange(len(labels)), labels]
    return -np.log(np.maximum(p, PROB_FLOOR))


def ce_weights(probs: np.ndarray, labels: np.ndarray, readout, width: int) -> np.ndarray:
    """Diagonal observable whose expectation gradient equals d(mean CE)/d(params).

    Only basis states whose readout bits spell the label carry weight
    ``-1 / (B * p_label)``.
    """
    b = len(labels)
    p = np.maximum(probs[np.arange(b), labels], PROB_FLOOR)
    idx = np.arange(2**width)
    r = len(readout)
    k_of_idx = np.zeros(2**width, dtype=int)
    for pos, q in enumerate(readout):
        k_of_idx |= ((idx >> (width - 1 - q)) & 1) << (r - 1 - pos)
    hit = k_of_idx[None, :] == labels[:, None]
    return np.where(hit, (-1.0 / (b * p))[:, None], 0.0)


def loss_and_gradient(model: ClassifierModel, features, labels, method: str = "adjoint"):
    """Mean cross-entropy over the batch and its gradient shaped like ``theta``."""
    labels = np.asarray(labels, dtype=int)
    if len(labels) == 0:
        raise ValueError("empty batch")
    circ = build_ansatz(model)
    states = input_states(model, features)
    probs = circuit_probs(circ, model.readout, states)
    weights = ce_weights(probs, labels, model.readout, circ.width)
    if method == "adjoint":
        g = adjoint_gradient(circ, states, weights, tags={"clf"})
    elif method == "parameter_shift":
        g = parameter_shift_gradient(circ, states, weights)
    else:
        raise ValueError(f"unknown gradient method {method!r}")
    grad = g.sum(axis=0).reshape(model.theta.shape)
    return float(batch_cross_entropy(probs, labels).mean()), grad


def gradient(model: ClassifierModel, features, labels, method: str = "adjoint") -> np.ndarray:
    return loss_and_gradient(model, features, labels, method)[1]


# --- optimisation -----------------------------------------------------------------


@dataclass
class Schedule:
    """``stages`` is a list of ``(epochs, learning_rate)`` run back to back."""

    optimizer: str = "adam"
    stages: list = field(default_factory=lambda: [(5, 1e-3), (5, 1e-4)])
    batch_size: int = 64
    seed: int = 0

    @property
    def epochs(self) -> int:
        return sum(int(e) for e, _ in self.stages)

    def lr_at(self, epoch: int) -> float:
        """Learning rate for zero-based ``epoch``."""
        acc = 0
        for e, lr in self.stages:
            acc += int(e)
            if epoch < acc:
                return float(lr)
        return float(self.stages[-1][1])

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Adam:
    def __init__(self, shape, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params, grad, lr):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return params - lr * mhat / (np.sqrt(vhat) + self.eps)


class SGD:
    def __init__(self, shape):
        pass

    def step(self, params, grad, lr):
        return params - lr * grad


def make_optimizer(name: str, shape):
    if name == "adam":
        return Adam(shape)
    if name == "sgd":
        return SGD(shape)
    raise ValueError(f"unknown optimizer {name!r}")


def batches(n: int, batch_size: int, seed: int, epoch: int):
    order = qmath.rng_for(seed, 1, epoch).permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def accuracy(model: ClassifierModel, features, labels) -> float:
    if len(labels) == 0:
        return float("nan")
    return float(np.mean(predict(model, features) == np.asarray(labels)))


def train(model: ClassifierModel, dataset: LabeledDataset, schedule: Schedule, log=None):
    """Train a copy of ``model`` on the ``train`` split; returns ``(model, metrics)``.

    Metrics hold one row per epoch with the mean training loss and the train
    and test accuracies measured after the epoch.
    """
    tr, te = dataset.train(), dataset.test()
    if len(tr) == 0:
        raise ValueError("no training samples")
    model = model.copy()
    opt = make_optimizer(schedule.optimizer, model.theta.shape)
    metrics = []
    for epoch in range(schedule.epochs):
        lr = schedule.lr_at(epoch)
        losses = []
        for idx in batches(len(tr), schedule.batch_size, schedule.seed, epoch):
            loss, grad = loss_and_gradient(model, tr.features[idx], tr.labels[idx])
            model.theta = opt.step(model.theta, grad, lr)
            losses.append(loss * len(idx))
        row = {
            "epoch": epoch + 1,
            "lr": lr,
            "train_loss": float(np.sum(losses) / len(tr)),
            "train_accuracy": accuracy(model, tr.features, tr.labels),
            "test_accuracy": accuracy(model, te.features, te.labels) if len(te) else float("nan"),
        }
        metrics.append(row)
        if log is not None:
            log(row)
    return model, metrics


# --- checkpoints ---------------------------------------------------------------------


def model_to_json(model: ClassifierModel, schedule: Schedule | None = None, seed: int | None = None) -> dict:
    return {
        "d": model.d,
        "d_a": model.d_a,
        "n_classes": model.n_classes,
        "layers": model.layers,
        "theta_order": "layer, qubit, angle (row-major); angles are ROT(w1, w2, w3) = RZ(w1) RY(w2) RZ(w3)",
        "theta": model.theta.ravel().tolist(),
        "encoding": "amplitude; pixels row-major, raw intensities in [0, 1]",
        "schedule": asdict(schedule) if schedule else None,
        "schedule_fingerprint": schedule.fingerprint() if schedule else None,
        "seed": seed,
    }


def model_from_json(doc: dict) -> ClassifierModel:
    d_plus = doc["d"] + doc["d_a"]
    theta = np.array(doc["theta"], dtype=float).reshape(doc["layers"], d_plus, 3)
    return ClassifierModel(doc["d"], doc["n_classes"], doc["layers"], theta)


def save_model(path, model: ClassifierModel, schedule: Schedule | None = None, seed: int | None = None):
    with open(path, "w") as fh:
        json.dump(model_to_json(model, schedule, seed), fh, indent=1)


def load_model(path) -> ClassifierModel:
    with open(path) as fh:
        return model_from_json(json.load(fh))
