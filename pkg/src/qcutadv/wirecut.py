"""Wire cutting by quasiprobability decomposition of the identity channel.

A decomposition is a list of measure-and-prepare terms. Each term measures the
cut wires in an orthonormal basis ``{e_o}``, attaches a real value ``lambda_o``
to outcome ``o`` and prepares a (possibly mixed) state that may depend on the
outcome. Its action on an operator ``X`` of the cut wires is::

    c * sum_o lambda_o <e_o|X|e_o> rho_{prep(o)}

The sum over all terms is the identity map. A *preparation slot* is a pair
``(term index, preparation index)``; tampering acts slot by slot.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import product

import numpy as np

from . import qmath
from .circuit import CircuitIR, Gate, from_text, simulate, to_text


class Scheme(str, Enum):
    PENG_1 = "PENG_1"
    PAULI_M = "PAULI_M"
    HARADA_MUB = "HARADA_MUB"


class CutError(ValueError):
    pass


@dataclass(frozen=True)
class Preparation:
    """Mixture ``sum_k weights[k] |states[k]><states[k]|``."""

    weights: tuple[float, ...]
    states: np.ndarray

    def __post_init__(self):
        st = np.atleast_2d(np.asarray(self.states, dtype=complex))
        object.__setattr__(self, "states", st)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != st.shape[0]:
            raise ValueError("one weight per pure component is required")
        if min(self.weights) < 0 or abs(sum(self.weights) - 1) > 1e-10:
            raise ValueError("mixture weights must be a probability vector")
        if np.max(np.abs(np.linalg.norm(st, axis=1) - 1)) > 1e-10:
            raise ValueError("preparation components must be normalised")

    @classmethod
    def pure(cls, vec) -> Preparation:
        return cls((1.0,), np.asarray(vec, dtype=complex)[None, :])

    def density(self) -> np.ndarray:
        return np.einsum("k,ki,kj->ij", np.array(self.weights), self.states, self.states.conj())

    def conjugated(self, u: np.ndarray) -> Preparation:
        return Preparation(self.weights, self.states @ u.T)


@dataclass(frozen=True)
class DecompTerm:
    coefficient: float
    basis: np.ndarray  # rows are the measurement outcome vectors
    outcome_values: tuple[float, ...]
    preparations: tuple[Preparation, ...]
    prep_of_outcome: tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        object.__setattr__(self, "basis", b)
        if not qmath.is_unitary(b):
            raise ValueError("measurement basis must be orthonormal")
        if len(self.outcome_values) != b.shape[0] or len(self.prep_of_outcome) != b.shape[0]:
            raise ValueError("one value and one preparation index per outcome")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def scale(self) -> float:
        return float(max(abs(v) for v in self.outcome_values))

    def observable(self) -> np.ndarray:
        vals = np.array(self.outcome_values)
        return np.einsum("o,oi,oj->ij", vals, self.basis.conj(), self.basis).conj()

    def apply(self, x: np.ndarray) -> np.ndarray:
        # <e_o| X |e_o> with e_o the rows of basis
        probs = np.einsum("oi,ij,oj->o", self.basis.conj(), x, self.basis)
        out = np.zeros_like(x, dtype=complex)
        dens = [p.density() for p in self.preparations]
        for o, (lam, pi) in enumerate(zip(self.outcome_values, self.prep_of_outcome)):
            out += lam * probs[o] * dens[pi]
        return self.coefficient * out


def kappa(terms) -> float:
    """Sampling overhead ``sum_t |c_t| * max_o |lambda_o|``."""
    return float(sum(abs(t.coefficient) * t.scale for t in terms))


def _basis_states(m: int) -> np.ndarray:
    return np.eye(2**m, dtype=complex)


_EIG = {
    "I": np.eye(2, dtype=complex),
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "Y": np.array([[1, 1j], [1, -1j]], dtype=complex) / np.sqrt(2),
}
_EIGVAL = {"I": (1.0, 1.0), "Z": (1.0, -1.0), "X": (1.0, -1.0), "Y": (1.0, -1.0)}


def _pauli_eigensystem(label: str):
    """Rows: product eigenvectors of a Pauli string, with their eigenvalues."""
    vecs = np.ones((1, 1), dtype=complex)
    vals = np.ones(1)
    for ch in label:
        vecs = np.einsum("ai,bj->abij", vecs, _EIG[ch]).reshape(vecs.shape[0] * 2, -1)
        vals = np.kron(vals, np.array(_EIGVAL[ch]))
    return vecs, vals


def _mub_circuits(m: int) -> list[CircuitIR]:
    if m == 1:
        return [
            CircuitIR(1, [Gate("H", (0,))]),
            CircuitIR(1, [Gate("H", (0,)), Gate("S", (0,))]),
        ]
    h = lambda q: Gate("H", (q,))  # noqa: E731
    s = lambda q: Gate("S", (q,))  # noqa: E731
    cz = [h(1), Gate("CNOT", (0, 1)), h(1)]
    return [
        CircuitIR(2, [h(0), h(1)]),
        CircuitIR(2, [h(0), s(0), h(1), s(1)]),
        CircuitIR(2, [h(0), h(1), *cz, h(0), s(1), h(1)]),
        CircuitIR(2, [h(0), h(1), *cz, h(0), h(1), s(1)]),
    ]


def mub_unitaries(m: int) -> list[np.ndarray]:
    """``2**m`` Clifford unitaries; with the identity they map the computational
    basis onto ``2**m + 1`` mutually unbiased bases."""
    if m not in (1, 2):
        raise CutError(f"mutually unbiased bases are provided for m in {{1, 2}}, got {m}")
    return [c.unitary() for c in _mub_circuits(m)]


def decomposition_terms(scheme: Scheme | str, m: int) -> list[DecompTerm]:
    scheme = Scheme(scheme)
    if scheme is Scheme.PENG_1:
        if m != 1:
            raise CutError("PENG_1 cuts a single wire")
        return _peng_terms()
    if m not in (1, 2):
        raise CutError(f"{scheme.value} supports m in {{1, 2}}, got {m}")
    if scheme is Scheme.PAULI_M:
        return _pauli_terms(m)
    return _harada_terms(m)


def _peng_terms() -> list[DecompTerm]:
    terms = []
    for p in "IXYZ":
        basis, vals = _pauli_eigensystem(p)
        for k, sign in enumerate((0.5, -0.5)):
            coeff = 0.5 if p == "I" else sign
            terms.append(
                DecompTerm(coeff, basis, tuple(vals), (Preparation.pure(basis[k]),), (0, 0), f"{p}:{k}")
            )
    return terms


def _pauli_terms(m: int) -> list[DecompTerm]:
    terms = []
    for label in ("".join(t) for t in product("IXYZ", repeat=m)):
        basis, vals = _pauli_eigensystem(label)
        for k in range(2**m):
            coeff = float(vals[k]) / 2**m
            terms.append(
                DecompTerm(coeff, basis, tuple(vals), (Preparation.pure(basis[k]),), (0,) * 2**m, f"{label}:{k}")
            )
    return terms


def _harada_terms(m: int) -> list[DecompTerm]:
    dim = 2**m
    terms = []
    for i, u in enumerate(mub_unitaries(m)):
        basis = u.T.copy()  # rows U|j>
        preps = tuple(Preparation.pure(basis[j]) for j in range(dim))
        terms.append(DecompTerm(1.0, basis, (1.0,) * dim, preps, tuple(range(dim)), f"U{i + 1}"))
    comp = _basis_states(m)
    mixes = tuple(
        Preparation((1.0 / (dim - 1),) * (dim - 1), np.array([comp[k] for k in range(dim) if k != j]))
        for j in range(dim)
    )
    terms.append(DecompTerm(-(dim - 1.0), comp, (1.0,) * dim, mixes, tuple(range(dim)), "rho_j"))
    return terms


# --- cut plans ---------------------------------------------------------------


@dataclass(frozen=True)
class Fragment:
    circuit: CircuitIR
    qubits: tuple[int, ...]  # original qubit index of each local wire
    cut_qubits: tuple[int, ...]  # original indices of cut wires present in this fragment


@dataclass(frozen=True)
class CutPlan:
    original: CircuitIR
    cuts: tuple[tuple[int, int], ...]  # (gate position, qubit)
    m: int
    scheme: Scheme | None
    terms: tuple[DecompTerm, ...]
    fragments: tuple[Fragment, ...]
    position: int  # joint gate position at which the measure-and-prepare happens
    tampered: bool = False
    tamper_slots: tuple[tuple[int, int], ...] = field(default=())

    @property
    def kappa(self) -> float:
        return kappa(self.terms) if self.terms else 1.0

    @property
    def cut_qubits(self) -> tuple[int, ...]:
        return tuple(q for _, q in self.cuts)

    def slots(self) -> list[tuple[int, int]]:
        return [(t, p) for t, term in enumerate(self.terms) for p in range(len(term.preparations))]


def _fragments(c: CircuitIR, cuts) -> tuple[Fragment, ...]:
    cut_pos = {q: p for p, q in cuts}
    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        parent[find(a)] = find(b)

    def seg(q, gi):
        return (q, int(q in cut_pos and gi >= cut_pos[q]))

    for q in range(c.width):
        find((q, 0))
        if q in cut_pos:
            find((q, 1))
    gate_seg = []
    for gi, g in enumerate(c.gates):
        segs = [seg(q, gi) for q in g.wires]
        for s in segs[1:]:
            union(segs[0], s)
        gate_seg.append(segs[0])
    up_roots = {find((q, 0)) for q in cut_pos}
    down_roots = {find((q, 1)) for q in cut_pos}
    if up_roots & down_roots:
        raise CutError("cuts do not separate the circuit into upstream and downstream parts")

    def side(s):
        return "down" if find(s) in down_roots else "up"

    frags = []
    for name in ("up", "down"):
        qubits = sorted({s[0] for s in parent if side(s) == name})
        local = {q: i for i, q in enumerate(qubits)}
        gates = [
            replace(g, wires=tuple(local[w] for w in g.wires))
            for g, s in zip(c.gates, gate_seg)
            if side(s) == name
        ]
        frags.append(Fragment(CircuitIR(len(qubits), gates), tuple(qubits), tuple(q for q in cut_pos if q in local)))
    return tuple(frags)


def cut_circuit(c: CircuitIR, cuts, scheme: Scheme | str | None = None) -> CutPlan:
    """Plan a cut of the wires ``cuts = [(gate_position, qubit), ...]``.

    ``gate_position`` counts the gates that precede the cut. The decomposition
    for all cut wires is applied jointly at the latest cut position, so no
    gate may touch a cut wire between its own cut and that position.
    """
    cuts = tuple((int(p), int(q)) for p, q in cuts)
    if not cuts:
        return CutPlan(c, (), 0, None, (), (Fragment(c, tuple(range(c.width)), ()),), 0)
    if len(cuts) > 2:
        raise CutError(f"at most 2 simultaneous wire cuts are supported, got {len(cuts)}")
    qubits = [q for _, q in cuts]
    if len(set(qubits)) != len(qubits):
        raise CutError("each cut wire may cross the boundary only once")
    for p, q in cuts:
        if not (0 <= q < c.width) or not (0 <= p <= len(c.gates)):
            raise CutError(f"cut location {(p, q)} is outside the circuit")
    if scheme is None:
        raise CutError("a decomposition scheme is required for a non-empty cut")
    position = max(p for p, _ in cuts)
    for p, q in cuts:
        if any(q in g.wires for g in c.gates[p:position]):
            raise CutError(f"wire {q} is used between its cut at {p} and the joint cut position {position}")
    terms = tuple(decomposition_terms(scheme, len(cuts)))
    frags = _fragments(c, cuts)
    return CutPlan(c, cuts, len(cuts), Scheme(scheme), terms, frags, position)


# --- tampering and the effective boundary map --------------------------------


@dataclass(frozen=True)
class TamperSpec:
    """Unitary perturbations of prepared states.

    ``uniform`` applies one unitary to every targeted slot (``targets=None``
    means all slots); ``per_slot`` maps individual slots to unitaries.
    """

    uniform: np.ndarray | None = None
    per_slot: dict = field(default_factory=dict)
    targets: tuple[tuple[int, int], ...] | None = None

    @classmethod
    def uniform_unitary(cls, u) -> TamperSpec:
        return cls(uniform=qmath.check_unitary(u))

    @classmethod
    def per_preparation(cls, mapping: dict) -> TamperSpec:
        return cls(per_slot={tuple(k): qmath.check_unitary(v) for k, v in mapping.items()})

    def unitary_for(self, slot) -> np.ndarray | None:
        if slot in self.per_slot:
            return self.per_slot[slot]
        if self.uniform is not None and (self.targets is None or slot in self.targets):
            return self.uniform
        return None


def tamper(plan: CutPlan, spec: TamperSpec) -> CutPlan:
    dim = 2**plan.m
    mats = ([spec.uniform] if spec.uniform is not None else []) + list(spec.per_slot.values())
    for u in mats:
        qmath.check_unitary(u)
        if u.shape != (dim, dim):
            raise CutError(f"perturbation of shape {u.shape} does not act on {plan.m} cut wire(s)")
    terms = []
    touched = []
    for t, term in enumerate(plan.terms):
        preps = []
        for p, prep in enumerate(term.preparations):
            u = spec.unitary_for((t, p))
            if u is None:
                preps.append(prep)
            else:
                preps.append(prep.conjugated(u))
                touched.append((t, p))
        terms.append(replace(term, preparations=tuple(preps)))
    return replace(plan, terms=tuple(terms), tampered=True, tamper_slots=plan.tamper_slots + tuple(touched))


def apply_boundary_map(plan: CutPlan, x) -> np.ndarray:
    """Action of the (possibly tampered) decomposition on an operator of the cut wires."""
    x = np.asarray(x, dtype=complex)
    out = np.zeros_like(x)
    for term in plan.terms:
        out += term.apply(x)
    return out


def effective_channel(plan: CutPlan) -> tuple[np.ndarray, np.ndarray]:
    """Superoperator (row-major vectorisation) and Choi matrix of the boundary map."""
    if plan.m > 2:
        raise CutError("effective channel is only built for m <= 2")
    dim = 2**plan.m
    superop = np.zeros((dim * dim, dim * dim), dtype=complex)
    choi = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            unit = np.zeros((dim, dim), dtype=complex)
            unit[i, j] = 1.0
            img = apply_boundary_map(plan, unit) if plan.m else unit
            superop[:, i * dim + j] = img.ravel()
            choi += np.kron(unit, img)
    return superop, choi


@dataclass(frozen=True)
class ChannelReport:
    tp: bool
    cp: bool
    min_eigenvalue: float
    tp_deviation: float


def cp_tp_check(choi, m: int, atol: float = 1e-8) -> ChannelReport:
    dim = 2**m
    c = np.asarray(choi, dtype=complex)
    if c.shape != (dim * dim, dim * dim):
        raise ValueError(f"Choi matrix must be {dim * dim}x{dim * dim}")
    ptrace = np.einsum("iaja->ij", c.reshape(dim, dim, dim, dim))
    tp_dev = qmath.operator_norm(ptrace - np.eye(dim))
    min_eig = float(np.min(np.linalg.eigvalsh((c + c.conj().T) / 2)))
    return ChannelReport(tp_dev <= atol, min_eig >= -atol, min_eig, float(tp_dev))


def search_non_cp(plan: CutPlan, n_specs: int, seed: int, slots_per_spec: int = 1):
    """Random search for per-preparation tamperings whose boundary map is not CP.

    Returns ``(spec, report, tries)`` for the most negative Choi eigenvalue seen,
    stopping early once it falls below ``-1e-6``.
    """
    all_slots = plan.slots()
    dim = 2**plan.m
    best = None
    for k in range(n_specs):
        rng = qmath.rng_for(seed, k)
        chosen = rng.choice(len(all_slots), size=min(slots_per_spec, len(all_slots)), replace=False)
        spec = TamperSpec.per_preparation(
            {all_slots[i]: qmath.haar_unitaries(dim, 1, rng)[0] for i in chosen}
        )
        report = cp_tp_check(effective_channel(tamper(plan, spec))[1], plan.m)
        if best is None or report.min_eigenvalue < best[1].min_eigenvalue:
            best = (spec, report, k + 1)
        if report.min_eigenvalue < -1e-6:
            break
    return best


# --- recombination -------------------------------------------------------------


def _branch_table(plan: CutPlan, state, obs):
    """Simulate every (term, outcome, mixture component) branch of the plan.

    Returns one ``(probs, weights, values)`` triple per term. ``probs[o]`` is the
    outcome probability, ``weights[o]`` the mixture weights of the state
    prepared after outcome ``o`` and ``values[o][k]`` the unnormalised
    expectation of ``obs`` (it carries the factor ``probs[o]``).
    """
    c = plan.original
    n = c.width
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (2**n,):
        raise ValueError("input state dimension does not match the circuit")
    obs = np.asarray(obs, dtype=complex)
    psi = simulate(c.slice(0, plan.position), psi)
    cq = list(plan.cut_qubits)
    rest = [q for q in range(n) if q not in cq]
    m = plan.m
    a = np.transpose(psi.reshape((2,) * n), cq + rest).reshape(2**m, 2 ** (n - m))
    inverse = np.argsort(cq + rest)

    branches = []
    probs_all = []
    for term in plan.terms:
        phis = term.basis.conj() @ a  # row o: (<e_o| ⊗ I)|psi>
        probs_all.append(np.sum(np.abs(phis) ** 2, axis=1))
        for o in range(term.dim):
            prep = term.preparations[term.prep_of_outcome[o]]
            for vec in prep.states:
                joint = np.outer(vec, phis[o]).reshape((2,) * n)
                branches.append(np.transpose(joint, inverse).reshape(-1))
    out = simulate(c.slice(plan.position), np.array(branches))
    raw = np.einsum("bi,ij,bj->b", out.conj(), obs, out).real

    table = []
    pos = 0
    for term, probs in zip(plan.terms, probs_all):
        weights, vals = [], []
        for o in range(term.dim):
            prep = term.preparations[term.prep_of_outcome[o]]
            kk = len(prep.states)
            weights.append(np.array(prep.weights))
            vals.append(raw[pos : pos + kk])
            pos += kk
        table.append((probs, weights, vals))
    return table


def recombine_exact(plan: CutPlan, state, obs) -> float:
    """Exact expectation of ``obs`` reconstructed from every branch of the plan."""
    if not plan.terms:
        out = simulate(plan.original, np.asarray(state, dtype=complex))
        return float(np.real(out.conj() @ np.asarray(obs) @ out))
    total = 0.0
    for term, (_, weights, vals) in zip(plan.terms, _branch_table(plan, state, obs)):
        # vals are unnormalised: they already carry the outcome probability
        contrib = sum(lam * float(np.dot(w, v)) for lam, w, v in zip(term.outcome_values, weights, vals))
        total += term.coefficient * contrib
    return float(total)


def recombine_sampled(plan: CutPlan, state, obs, shots: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate: draw a term with probability ``|c| scale / kappa``,
    a measurement outcome and a mixture component, and score
    ``kappa * sign(c) * lambda_o / scale * <obs>``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = qmath.rng_for(seed)
    if not plan.terms:
        val = recombine_exact(plan, state, obs)
        return val, 0.0
    table = _branch_table(plan, state, obs)
    kap = plan.kappa
    term_p = np.array([abs(t.coefficient) * t.scale for t in plan.terms]) / kap
    t_idx = rng.choice(len(plan.terms), size=shots, p=term_p)
    samples = np.empty(shots)
    for t in range(len(plan.terms)):
        sel = np.flatnonzero(t_idx == t)
        if sel.size == 0:
            continue
        term = plan.terms[t]
        probs_raw, weights, vals = table[t]
        probs = np.clip(probs_raw, 0, None)
        probs = probs / probs.sum()
        outcomes = rng.choice(term.dim, size=sel.size, p=probs)
        scores = np.empty(sel.size)
        for o in range(term.dim):
            so = np.flatnonzero(outcomes == o)
            if so.size == 0:
                continue
            w = weights[o]
            comps = rng.choice(len(w), size=so.size, p=w)
            # normalise by the outcome probability to get the conditional expectation
            cond = vals[o] / max(probs_raw[o], 1e-300)
            scores[so] = term.outcome_values[o] / term.scale * cond[comps]
        samples[sel] = kap * np.sign(term.coefficient) * scores
    est = float(samples.mean())
    err = float(samples.std(ddof=1) / np.sqrt(shots)) if shots > 1 else float("inf")
    return est, err


def recombine_fragments(plan: CutPlan, up_state, down_state, obs_up, obs_down) -> float:
    """Reconstruction from independent fragment runs for a product input and observable.

    ``up_state`` lives on the upstream fragment's wires; ``down_state`` on the
    downstream fragment's wires other than the cut ones. ``obs_up`` acts on the
    upstream wires that are not cut; ``obs_down`` on all downstream wires.
    """
    if plan.m == 0:
        raise CutError("plan has no cut")
    up, down = plan.fragments
    m = plan.m
    upc = [up.qubits.index(q) for q in plan.cut_qubits]
    up_rest = [i for i in range(up.circuit.width) if i not in upc]
    psi = simulate(up.circuit, np.asarray(up_state, dtype=complex))
    a = np.transpose(psi.reshape((2,) * up.circuit.width), upc + up_rest).reshape(2**m, -1)
    obs_up = np.asarray(obs_up, dtype=complex)

    dc = [down.qubits.index(q) for q in plan.cut_qubits]
    d_rest = [i for i in range(down.circuit.width) if i not in dc]
    inverse = np.argsort(dc + d_rest)
    down_state = np.asarray(down_state, dtype=complex)
    obs_down = np.asarray(obs_down, dtype=complex)

    def down_value(vec):
        joint = np.outer(vec, down_state).reshape((2,) * down.circuit.width)
        out = simulate(down.circuit, np.transpose(joint, inverse).reshape(-1))
        return float(np.real(out.conj() @ obs_down @ out))

    total = 0.0
    cache: dict = {}
    for t, term in enumerate(plan.terms):
        phis = term.basis.conj() @ a
        up_vals = np.real(np.einsum("oi,ij,oj->o", phis.conj(), obs_up, phis)) if up_rest else np.sum(np.abs(phis) ** 2, axis=1)
        for o in range(term.dim):
            pi = term.prep_of_outcome[o]
            if (t, pi) not in cache:
                prep = term.preparations[pi]
                cache[(t, pi)] = sum(w * down_value(v) for w, v in zip(prep.weights, prep.states))
            total += term.coefficient * term.outcome_values[o] * up_vals[o] * cache[(t, pi)]
    return float(total)


# --- serialisation ---------------------------------------------------------------


def _cvec(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.ravel(v)]


def _from_cvec(data, shape) -> np.ndarray:
    arr = np.array(data, dtype=float)
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(shape)


def plan_to_json(plan: CutPlan) -> dict:
    return {
        "scheme": plan.scheme.value if plan.scheme else None,
        "cuts": [list(c) for c in plan.cuts],
        "m": plan.m,
        "position": plan.position,
        "kappa": plan.kappa,
        "tampered": plan.tampered,
        "circuit": to_text(plan.original),
        "fragments": [{"qubits": list(f.qubits), "width": f.circuit.width, "n_gates": len(f.circuit.gates)} for f in plan.fragments],
        "terms": [
            {
                "label": t.label,
                "coefficient": t.coefficient,
                "basis": _cvec(t.basis),
                "outcome_values": list(t.outcome_values),
                "prep_of_outcome": list(t.prep_of_outcome),
                "preparations": [{"weights": list(p.weights), "states": _cvec(p.states)} for p in t.preparations],
            }
            for t in plan.terms
        ],
    }


def plan_from_json(doc: dict) -> CutPlan:
    circuit = from_text(doc["circuit"])
    plan = cut_circuit(circuit, [tuple(c) for c in doc["cuts"]], doc["scheme"])
    dim = 2 ** doc["m"]
    terms = tuple(
        DecompTerm(
            t["coefficient"],
            _from_cvec(t["basis"], (dim, dim)),
            tuple(t["outcome_values"]),
            tuple(Preparation(tuple(p["weights"]), _from_cvec(p["states"], (len(p["weights"]), dim))) for p in t["preparations"]),
            tuple(t["prep_of_outcome"]),
            t["label"],
        )
        for t in doc["terms"]
    )
    return replace(plan, terms=terms, tampered=doc.get("tampered", False))


def dumps_plan(plan: CutPlan) -> str:
    return json.dumps(plan_to_json(plan), indent=2)
