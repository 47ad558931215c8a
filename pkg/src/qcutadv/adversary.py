"""Adversarial blocks inserted between classifier layers, and attack training.

A block is ``r`` layers, each a ROT on every target qubit followed by a ring
of CRZ gates between consecutive targets. With all angles zero it is the
identity, so an attack starts from the clean classifier.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import qmath
from .circuit import CircuitIR, Gate, _primitive, adjoint_gradient, apply_matrix
from .classifier import (
    ClassifierModel,
    LabeledDataset,
    Schedule,
    batch_cross_entropy,
    batches,
    build_ansatz,
    ce_weights,
    circuit_probs,
    input_states,
    make_optimizer,
    predict,
)

MAX_BLOCK_QUBITS = 10
PENALTIES = ("theta_l2", "hs")
OBJECTIVE_SIGNS = ("limit", "literal")
CSV_COLUMNS = ("epoch", "strength", "misclassification_rate", "loss", "gamma", "placement", "seed")


@dataclass
class AdversarialBlock:
    boundary: int
    depth: int
    targets: tuple[int, ...]
    theta_hat: np.ndarray | None = None

    def __post_init__(self):
        self.targets = tuple(int(q) for q in self.targets)
        if len(set(self.targets)) != len(self.targets) or not self.targets:
            raise ValueError(f"target qubits must be distinct and nonempty, got {self.targets}")
        if self.depth < 1:
            raise ValueError("block depth must be at least 1")
        shape = (self.depth, len(self.targets), 4)
        if self.theta_hat is None:
            self.theta_hat = np.zeros(shape)
        self.theta_hat = np.array(self.theta_hat, dtype=float)
        if self.theta_hat.shape != shape:
            raise ValueError(f"theta_hat has shape {self.theta_hat.shape}, expected {shape}")

    @property
    def d_adv(self) -> int:
        return len(self.targets)

    def ring(self) -> list[tuple[int, int]]:
        """Index pairs ``(i, i+1 mod d_adv)`` into ``targets``; empty for a single target."""
        n = self.d_adv
        return [(i, (i + 1) % n) for i in range(n)] if n >= 2 else []

    def gates(self, tag: str = "adv", wires=None) -> list[Gate]:
        wires = self.targets if wires is None else tuple(wires)
        out = []
        for layer in self.theta_hat:
            out += [Gate("ROT", (wires[i],), tuple(layer[i, :3]), tag=tag) for i in range(self.d_adv)]
            out += [Gate("CRZ", (wires[i], wires[j]), (layer[i, 3],), tag=tag) for i, j in self.ring()]
        return out

    def param_index(self) -> np.ndarray:
        """Flat ``theta_hat`` index of each gate parameter, in gate order."""
        idx = np.arange(self.theta_hat.size).reshape(self.theta_hat.shape)
        order = []
        for layer in idx:
            for i in range(self.d_adv):
                order += list(layer[i, :3])
            order += [layer[i, 3] for i, _ in self.ring()]
        return np.array(order, dtype=int)

    def copy(self) -> AdversarialBlock:
        return AdversarialBlock(self.boundary, self.depth, self.targets, self.theta_hat.copy())


def block_circuit(block: AdversarialBlock) -> CircuitIR:
    """The block on its own register; ``targets[0]`` becomes local qubit 0."""
    return CircuitIR(block.d_adv, block.gates(wires=range(block.d_adv)))


def block_unitary(block: AdversarialBlock) -> np.ndarray:
    if block.d_adv > MAX_BLOCK_QUBITS:
        raise ValueError(f"block on {block.d_adv} qubits exceeds the {MAX_BLOCK_QUBITS}-qubit limit")
    return block_circuit(block).unitary()


def unitary_distance(u) -> float:
    """Normalised ``||U - I||_2 / sqrt(dim)``, between 0 and 2."""
    u = qmath.check_unitary(u)
    return qmath.hs_norm(u - np.eye(u.shape[0])) / math.sqrt(u.shape[0])


def block_distance(block: AdversarialBlock) -> float:
    return unitary_distance(block_unitary(block))


def attack_strength(blocks) -> float:
    return float(sum(block_distance(b) for b in blocks))


def _trace_gradient(block: AdversarialBlock) -> tuple[complex, np.ndarray]:
    """``Tr U`` and ``d Re Tr U / d theta_hat`` by a reverse sweep over basis states."""
    circ = block_circuit(block)
    n, dim = circ.width, 2**circ.width
    psi = circ.unitary().T  # row b is U|b>
    tr = complex(np.trace(psi))
    lam = np.eye(dim, dtype=complex)
    flat = []
    for g in reversed(circ.gates):
        prims = list(g.primitive_rotations())
        grads = [0.0] * g.n_params
        for pidx, gen, wires in reversed(prims):
            gpsi = apply_matrix(psi, gen, wires, n)
            # d Tr/dt = sum_b <lam_b| (-i/2) P |psi_b>
            grads[pidx] = float(np.real(-0.5j * np.sum(lam.conj() * gpsi)))
            undo = _primitive(gen, -g.params[pidx])
            psi = apply_matrix(psi, undo, wires, n)
            lam = apply_matrix(lam, undo, wires, n)
        flat = grads + flat
    out = np.zeros(block.theta_hat.size)
    np.add.at(out, block.param_index(), flat)
    return tr, out.reshape(block.theta_hat.shape)


def block_distance_gradient(block: AdversarialBlock) -> tuple[float, np.ndarray]:
    """Normalised HS distance to identity and its gradient (zero at the identity)."""
    dim = 2**block.d_adv
    tr, dtr = _trace_gradient(block)
    dist = math.sqrt(max(2 * dim - 2 * tr.real, 0.0))
    if dist < 1e-12:
        return 0.0, np.zeros_like(block.theta_hat)
    return dist / math.sqrt(dim), -dtr / (dist * math.sqrt(dim))


@dataclass
class AttackConfig:
    """Where to put blocks and how to train them.

    ``placements`` holds ``(boundary, depth)`` pairs; ``targets=None`` means
    every qubit. ``objective_sign="limit"`` minimises ``-CE + gamma * penalty``;
    ``"literal"`` flips the penalty sign.
    """

    placements: list[tuple[int, int]]
    targets: tuple[int, ...] | None = None
    gamma: float = 0.0
    penalty: str = "theta_l2"
    objective_sign: str = "limit"
    input_block_ancillas: bool = True
    schedule: Schedule = field(default_factory=lambda: Schedule("sgd", [(30, 0.1)], 32, 0))

    def __post_init__(self):
        self.placements = [(int(q), int(r)) for q, r in self.placements]
        if not self.placements:
            raise ValueError("at least one placement is required")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}")
        if self.objective_sign not in OBJECTIVE_SIGNS:
            raise ValueError(f"objective_sign must be one of {OBJECTIVE_SIGNS}")
        if self.targets is not None:
            self.targets = tuple(int(q) for q in self.targets)
            if len(set(self.targets)) != len(self.targets):
                raise ValueError("target qubits must be distinct")

    def descriptor(self) -> str:
        where = "|".join(f"q{q}r{r}" for q, r in self.placements)
        who = "all" if self.targets is None else "-".join(str(q + 1) for q in self.targets)
        return f"{where};targets={who}"


@dataclass
class AttackedModel:
    clean: ClassifierModel
    blocks: list[AdversarialBlock]

    def tags(self) -> list[str]:
        return [f"adv{i}" for i in range(len(self.blocks))]

    def circuit(self) -> CircuitIR:
        base = build_ansatz(self.clean)
        bounds = base.layer_boundaries
        # insert from the deepest boundary so earlier positions stay valid
        order = sorted(range(len(self.blocks)), key=lambda i: (self.blocks[i].boundary, i), reverse=True)
        circ = base
        for i in order:
            b = self.blocks[i]
            circ = circ.insert(bounds[b.boundary], b.gates(tag=f"adv{i}"))
        return circ

    def gradient_layout(self, circ: CircuitIR) -> list[tuple[int, np.ndarray]]:
        """For each adversarial gradient column: ``(block index, flat theta_hat index)``."""
        per_block = [iter(b.param_index()) for b in self.blocks]
        layout = []
        for g in circ.gates:
            if g.tag and g.tag.startswith("adv") and g.n_params:
                i = int(g.tag[3:])
                layout += [(i, next(per_block[i])) for _ in range(g.n_params)]
        return layout

    def probs(self, features) -> np.ndarray:
        return circuit_probs(self.circuit(), self.clean.readout, input_states(self.clean, features))

    def predict(self, features) -> np.ndarray:
        return np.argmax(self.probs(np.atleast_2d(features)), axis=1)

    def strength(self) -> float:
        return attack_strength(self.blocks)

    def copy(self) -> AttackedModel:
        return AttackedModel(self.clean, [b.copy() for b in self.blocks])


def preset_boundaries(layers: int) -> dict[str, list[int]]:
    q = [math.ceil(layers / 4), math.ceil(layers / 2), math.ceil(3 * layers / 4)]
    return {"input": [0], "quarter": [q[0]], "half": [q[1]], "three_quarter": [q[2]], "triple": q}


# local-qubit presets, 0-based (1-based {3,4,5} and {5,6,7,8})
TARGET_PRESETS = {"all": None, "local3": (2, 3, 4), "local4": (4, 5, 6, 7)}


def insert_blocks(model: ClassifierModel, cfg: AttackConfig) -> AttackedModel:
    """Freeze a copy of ``model`` and attach zero-initialised blocks."""
    frozen = model.copy()
    frozen.theta.setflags(write=False)
    blocks = []
    for q, r in cfg.placements:
        if not 0 <= q <= model.layers:
            raise ValueError(f"boundary {q} outside [0, {model.layers}]")
        targets = tuple(range(model.d_plus)) if cfg.targets is None else cfg.targets
        if any(t < 0 or t >= model.d_plus for t in targets):
            raise ValueError(f"target qubits {targets} outside the {model.d_plus}-qubit register")
        if q == 0 and not cfg.input_block_ancillas:
            targets = tuple(t for t in targets if t < model.d)
            if not targets:
                raise ValueError("input block has no data qubits to act on")
        blocks.append(AdversarialBlock(q, r, targets))
    return AttackedModel(frozen, blocks)


def misclassification_rate(model, features, labels) -> float:
    """Fraction of argmax predictions that miss ``labels``; accepts clean or attacked models."""
    labels = np.asarray(labels, dtype=int)
    if len(labels) == 0:
        raise ValueError("empty test set")
    if isinstance(model, AttackedModel):
        pred = model.predict(features)
    else:
        pred = predict(model, features)
    return float(np.mean(pred != labels))


def penalty_and_gradient(attacked: AttackedModel, kind: str) -> tuple[float, list[np.ndarray]]:
    if kind == "theta_l2":
        norm = math.sqrt(sum(float(np.sum(b.theta_hat**2)) for b in attacked.blocks))
        if norm == 0:
            return 0.0, [np.zeros_like(b.theta_hat) for b in attacked.blocks]
        return norm, [b.theta_hat / norm for b in attacked.blocks]
    parts = [block_distance_gradient(b) for b in attacked.blocks]
    return float(sum(p[0] for p in parts)), [p[1] for p in parts]


def attack_loss_and_gradient(attacked: AttackedModel, features, labels, cfg: AttackConfig, include_penalty: bool = True):
    """Objective to minimise, ``-CE ± gamma * penalty``, and its per-block gradients."""
    labels = np.asarray(labels, dtype=int)
    circ = attacked.circuit()
    readout = attacked.clean.readout
    states = input_states(attacked.clean, features)
    probs = circuit_probs(circ, readout, states)
    weights = ce_weights(probs, labels, readout, circ.width)
    cols = adjoint_gradient(circ, states, weights, tags=set(attacked.tags())).sum(axis=0)
    grads = [np.zeros(b.theta_hat.size) for b in attacked.blocks]
    for (i, flat), g in zip(attacked.gradient_layout(circ), cols):
        grads[i][flat] -= g
    grads = [g.reshape(b.theta_hat.shape) for g, b in zip(grads, attacked.blocks)]
    ce = float(batch_cross_entropy(probs, labels).mean())
    value = -ce
    if cfg.gamma > 0 and include_penalty:
        sign = 1.0 if cfg.objective_sign == "limit" else -1.0
        pen, pgrads = penalty_and_gradient(attacked, cfg.penalty)
        value += sign * cfg.gamma * pen
        grads = [g + sign * cfg.gamma * pg for g, pg in zip(grads, pgrads)]
    return value, grads


def shrink_theta(blocks, t: float):
    """Proximal map of ``t * ||theta_hat||`` (joint norm over all blocks)."""
    norm = math.sqrt(sum(float(np.sum(b.theta_hat**2)) for b in blocks))
    scale = max(0.0, 1.0 - t / norm) if norm > 0 else 0.0
    for b in blocks:
        b.theta_hat = b.theta_hat * scale


def _curve_row(attacked, test, epoch, cfg) -> dict:
    probs = attacked.probs(test.features)
    return {
        "epoch": epoch,
        "strength": attacked.strength(),
        "misclassification_rate": float(np.mean(np.argmax(probs, axis=1) != test.labels)),
        "loss": float(batch_cross_entropy(probs, test.labels).mean()),
        "gamma": cfg.gamma,
        "placement": cfg.descriptor(),
        "seed": cfg.schedule.seed,
    }


def train_attack(attacked: AttackedModel, dataset: LabeledDataset, cfg: AttackConfig, log=None):
    """Train the blocks on the train split; returns ``(attacked, curve)``.

    The curve has one row per epoch, starting with the untrained epoch 0.
    Strength and misclassification are measured exactly on the full test
    split; ``loss`` is the test cross-entropy of the attacked model.
    """
    tr, te = dataset.train(), dataset.test()
    if len(te) == 0:
        te = tr
    attacked = attacked.copy()
    sched = cfg.schedule
    opts = [make_optimizer(sched.optimizer, b.theta_hat.shape) for b in attacked.blocks]
    # the theta norm is handled by its proximal map, which stays stable for any gamma
    proximal = cfg.penalty == "theta_l2" and cfg.objective_sign == "limit" and cfg.gamma > 0
    curve = [_curve_row(attacked, te, 0, cfg)]
    if log is not None:
        log(curve[-1])
    for epoch in range(sched.epochs):
        lr = sched.lr_at(epoch)
        for idx in batches(len(tr), sched.batch_size, sched.seed, epoch):
            _, grads = attack_loss_and_gradient(attacked, tr.features[idx], tr.labels[idx], cfg, not proximal)
            for b, opt, g in zip(attacked.blocks, opts, grads):
                b.theta_hat = opt.step(b.theta_hat, g, lr)
            if proximal:
                shrink_theta(attacked.blocks, lr * cfg.gamma)
        curve.append(_curve_row(attacked, te, epoch + 1, cfg))
        if log is not None:
            log(curve[-1])
    return attacked, curve


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in curve:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
