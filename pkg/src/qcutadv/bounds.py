"""Robustness bounds for classifiers with inserted unitary perturbations.

Deterministic bound: ``|y_k - y^_k| <= sum_i min_phi ||I - phi U_i||_op`` (the
HS-norm variant is looser). Haar-average bound: for inputs ``W|0>`` with
Haar ``W`` the confidence shift has mean zero and variance
``||E^dag(Pi) - E~^dag(Pi)||_2^2 / (D (D + 1))``, giving a Chebyshev tail.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import qmath
from .adversary import block_unitary
from .circuit import CircuitIR, readout_projector
from .classifier import predict_probs

MC_CHUNK = 10_000


@dataclass
class BoundReport:
    op_distances: list[float]
    hs_distances: list[float]
    theorem1_bound: float
    corollary1_bound: float
    observed: float | None = None
    passed: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class HaarShiftStats:
    n_samples: int
    dim: int
    mean: float
    variance: float
    stderr: float
    analytic_variance: float
    delta: float | None = None
    tail_frequency: float | None = None
    tail_stderr: float | None = None
    chebyshev_bound: float | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def theorem1_bound(perturbations) -> BoundReport:
    """Sum of phase-minimised operator-norm (and HS-norm) distances to the identity."""
    us = [qmath.check_unitary(u) for u in perturbations]
    op = [qmath.min_phase_opnorm_distance(u) for u in us]
    hs = [qmath.min_phase_hs_distance(u) for u in us]
    return BoundReport(op, hs, float(sum(op)), float(sum(hs)))


def diamond_interval_unitary(u, v) -> tuple[float, float]:
    """Interval containing the diamond distance between the channels of ``u`` and ``v``."""
    u, v = qmath.check_unitary(u), qmath.check_unitary(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {v.shape}")
    x = qmath.min_phase_opnorm_distance(v.conj().T @ u)
    return x, 2 * x


def verify_theorem1(attacked, features, slack: float = 1e-9) -> BoundReport:
    """Largest confidence shift of an attacked classifier against its bound."""
    report = theorem1_bound([block_unitary(b) for b in attacked.blocks])
    clean = predict_probs(attacked.clean, np.atleast_2d(features))
    shifted = attacked.probs(np.atleast_2d(features))
    report.observed = float(np.max(np.abs(clean - shifted)))
    report.passed = report.observed <= report.theorem1_bound + slack
    return report


@dataclass
class LayeredInstance:
    """Clean layers ``E_i`` and perturbations ``U_i`` applied right after each layer."""

    layers: list[np.ndarray]
    perturbations: list[np.ndarray]
    readout: tuple[int, ...] = (0,)

    def __post_init__(self):
        if len(self.layers) != len(self.perturbations):
            raise ValueError("need one perturbation per layer")
        dims = {np.shape(m)[0] for m in self.layers + self.perturbations}
        if len(dims) != 1:
            raise ValueError("all layers and perturbations must share one dimension")

    @property
    def dim(self) -> int:
        return self.layers[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.dim))

    def clean_unitary(self) -> np.ndarray:
        out = np.eye(self.dim, dtype=complex)
        for e in self.layers:
            out = e @ out
        return out

    def attacked_unitary(self) -> np.ndarray:
        out = np.eye(self.dim, dtype=complex)
        for e, u in zip(self.layers, self.perturbations):
            out = u @ e @ out
        return out

    def projectors(self) -> list[np.ndarray]:
        return [readout_projector(self.n_qubits, self.readout, k) for k in range(2 ** len(self.readout))]


def _as_unitary(c) -> np.ndarray:
    if isinstance(c, CircuitIR):
        return c.unitary()
    return qmath.check_unitary(c)


def heisenberg(u, pi) -> np.ndarray:
    """``E^dag(Pi) = U^dag Pi U``."""
    u = _as_unitary(u)
    return u.conj().T @ pi @ u


def random_instance(d: int, n_gates: int, rng: np.random.Generator, max_strength: float = np.pi) -> LayeredInstance:
    dim = 2**d
    layers = list(qmath.haar_unitaries(dim, n_gates, rng))
    perts = [qmath.random_near_identity(dim, s, rng) for s in rng.uniform(0, max_strength, n_gates)]
    return LayeredInstance(layers, perts)


def theorem1_suite(d: int, max_gates: int, n_instances: int, seed: int, slack: float = 1e-9) -> dict:
    """Random layered instances with mixed-state inputs; counts bound violations."""
    violations = 0
    ordering_failures = 0
    worst_ratio = 0.0
    for i in range(n_instances):
        rng = qmath.rng_for(seed, i)
        inst = random_instance(d, int(rng.integers(1, max_gates + 1)), rng)
        rep = theorem1_bound(inst.perturbations)
        rho = qmath.random_density(inst.dim, rng)
        out_clean = inst.clean_unitary() @ rho @ inst.clean_unitary().conj().T
        out_att = inst.attacked_unitary() @ rho @ inst.attacked_unitary().conj().T
        obs = max(abs(np.trace(p @ (out_clean - out_att)).real) for p in inst.projectors())
        violations += obs > rep.theorem1_bound + slack
        ordering_failures += any(o > h + 1e-12 for o, h in zip(rep.op_distances, rep.hs_distances))
        if rep.theorem1_bound > 0:
            worst_ratio = max(worst_ratio, obs / rep.theorem1_bound)
    return {
        "d": d,
        "max_gates": max_gates,
        "n_instances": n_instances,
        "seed": seed,
        "violations": int(violations),
        "ordering_failures": int(ordering_failures),
        "max_observed_over_bound": worst_ratio,
        "passed": violations == 0 and ordering_failures == 0,
    }


def theorem2_probability(pi, perturbations, delta: float, d: int) -> float:
    """Lower bound on ``Pr{|y_k - y^_k| < delta}`` over Haar inputs, clamped to [0, 1]."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    dim = 2**d
    total = sum(qmath.hs_norm(np.eye(dim) - qmath.check_unitary(u)) for u in perturbations)
    tail = 4 * qmath.hs_norm(pi) ** 2 * total**2 / (dim * (dim + 1) * delta**2)
    return float(np.clip(1 - tail, 0.0, 1.0))


def theorem2_variance_analytic(clean, attacked, pi) -> float:
    """Exact Haar variance of the confidence shift.

    ``clean`` and ``attacked`` are unitaries (or circuits) acting on the data
    register alone.
    """
    u, v = _as_unitary(clean), _as_unitary(attacked)
    if u.shape != v.shape or u.shape != np.shape(pi):
        raise ValueError("clean, attacked and projector dimensions differ")
    dim = u.shape[0]
    return qmath.hs_norm(heisenberg(u, pi) - heisenberg(v, pi)) ** 2 / (dim * (dim + 1))


def haar_states(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``W|0>`` for ``n`` Haar-random ``W``; rows are states."""
    return qmath.haar_unitaries(dim, n, rng)[:, :, 0]


def haar_shift_monte_carlo(
    clean, attacked, pi, n_samples: int, seed: int, delta: float | None = None, perturbations=None
) -> HaarShiftStats:
    """Sample the confidence shift ``Tr(Pi E(s)) - Tr(Pi E~(s))`` on Haar-random pure inputs.

    Chunks draw from independent streams keyed by chunk index and are reduced in order.
    """
    u, v = _as_unitary(clean), _as_unitary(attacked)
    dim = u.shape[0]
    if dim > 16:
        raise ValueError("Monte Carlo limited to at most 4 qubits")
    a = heisenberg(u, pi) - heisenberg(v, pi)
    shifts = []
    for ci, start in enumerate(range(0, n_samples, MC_CHUNK)):
        psi = haar_states(dim, min(MC_CHUNK, n_samples - start), qmath.rng_for(seed, ci))
        shifts.append(np.einsum("bi,ij,bj->b", psi.conj(), a, psi).real)
    s = np.concatenate(shifts)
    var = float(np.var(s, ddof=1)) if n_samples > 1 else 0.0
    stats = HaarShiftStats(
        n_samples=n_samples,
        dim=dim,
        mean=float(np.mean(s)),
        variance=var,
        stderr=float(np.sqrt(var / n_samples)),
        analytic_variance=theorem2_variance_analytic(u, v, pi),
    )
    if delta is not None:
        freq = float(np.mean(np.abs(s) >= delta))
        stats.delta = delta
        stats.tail_frequency = freq
        stats.tail_stderr = float(np.sqrt(max(freq * (1 - freq), 1.0 / n_samples) / n_samples))
        if perturbations is not None:
            d = int(np.log2(dim))
            stats.chebyshev_bound = 1 - theorem2_probability(pi, perturbations, delta, d)
    return stats


def twirl_analytic(d: int) -> np.ndarray:
    dim = 2**d
    return (np.eye(dim * dim) + qmath.swap_operator(d)) / (dim * (dim + 1))


def twirl_check(d: int, n_samples: int, seed: int) -> float:
    """Max-abs entry deviation of the sampled ``E[s ⊗ s]`` from the analytic twirl."""
    if d > 3:
        raise ValueError("twirl check limited to d <= 3")
    dim = 2**d
    acc = np.zeros((dim * dim, dim * dim), dtype=complex)
    for ci, start in enumerate(range(0, n_samples, MC_CHUNK)):
        psi = haar_states(dim, min(MC_CHUNK, n_samples - start), qmath.rng_for(seed, ci))
        pp = (psi[:, :, None] * psi[:, None, :]).reshape(len(psi), -1)
        acc += pp.T @ pp.conj()
    return float(np.max(np.abs(acc / n_samples - twirl_analytic(d))))


@dataclass
class Theorem2Suite:
    d: int = 2
    n_gates: int = 2
    n_samples: int = 100_000
    delta: float = 0.15
    strength: float = 0.05
    seed: int = 0
    readout: tuple[int, ...] = field(default=(0,))


def theorem2_suite(cfg: Theorem2Suite) -> dict:
    """One random instance checked against the Haar-average statements."""
    rng = qmath.rng_for(cfg.seed, 10**6)
    dim = 2**cfg.d
    layers = list(qmath.haar_unitaries(dim, cfg.n_gates, rng))
    perts = [qmath.random_near_identity(dim, cfg.strength, rng) for _ in range(cfg.n_gates)]
    inst = LayeredInstance(layers, perts, cfg.readout)
    pi = inst.projectors()[0]
    stats = haar_shift_monte_carlo(
        inst.clean_unitary(), inst.attacked_unitary(), pi, cfg.n_samples, cfg.seed, cfg.delta, perts
    )
    rel = abs(stats.variance - stats.analytic_variance) / stats.analytic_variance
    return {
        "config": asdict(cfg),
        "stats": stats.to_dict(),
        "mean_within_4_stderr": abs(stats.mean) <= 4 * stats.stderr,
        "variance_relative_error": rel,
        "tail_consistent": stats.tail_frequency <= stats.chebyshev_bound + 3 * stats.tail_stderr,
    }
