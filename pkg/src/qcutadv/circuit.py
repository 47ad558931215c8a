"""Gate-level circuits and exact state-vector simulation.

Qubit 0 is the top wire and the most significant bit of a basis index. States
are arrays of shape ``(2**n,)`` or batches of shape ``(B, 2**n)``; every
simulation routine accepts both.

Text format (one gate per line, ``#`` starts a comment)::

    WIDTH 3
    RY 0 0.25
    CNOT 0 1
    ROT 2 0.1 0.2 0.3
    CRZ 1 2 0.5
    LAYER            # marks a layer boundary at the current position
    CUSTOM 0 1 <re00> <im00> <re01> <im01> ...   # row-major matrix entries
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import qmath
from .qmath import H, S, X, Y, Z

ONE_QUBIT_FIXED = {"H": H, "S": S, "X": X, "Y": Y, "Z": Z}
N_PARAMS = {"RZ": 1, "RY": 1, "ROT": 3, "CRZ": 1, "CNOT": 0, "CUSTOM": 0, **{k: 0 for k in ONE_QUBIT_FIXED}}
N_WIRES = {"RZ": 1, "RY": 1, "ROT": 1, "CRZ": 2, "CNOT": 2, **{k: 1 for k in ONE_QUBIT_FIXED}}

_P1 = np.diag([0.0, 1.0]).astype(complex)


def rz(t: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=complex)


def ry(t: float) -> np.ndarray:
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rot(w1: float, w2: float, w3: float) -> np.ndarray:
    # matrix product RZ(w1) RY(w2) RZ(w3): RZ(w3) acts first
    return rz(w1) @ ry(w2) @ rz(w3)


def crz(phi: float) -> np.ndarray:
    return np.diag([1, 1, np.exp(-0.5j * phi), np.exp(0.5j * phi)]).astype(complex)


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


@dataclass(frozen=True)
class Gate:
    kind: str
    wires: tuple[int, ...]
    params: tuple[float, ...] = ()
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)
    tag: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in N_PARAMS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(set(self.wires)) != len(self.wires):
            raise ValueError(f"gate wires must be distinct: {self.wires}")
        if self.kind == "CUSTOM":
            if self.matrix is None:
                raise ValueError("CUSTOM gate needs a matrix")
            m = qmath.check_unitary(self.matrix)
            if m.shape[0] != 2 ** len(self.wires):
                raise ValueError("CUSTOM matrix dimension does not match its wires")
            m = m.copy()
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)
        else:
            if len(self.wires) != N_WIRES[self.kind]:
                raise ValueError(f"{self.kind} acts on {N_WIRES[self.kind]} wire(s)")
            if len(self.params) != N_PARAMS[self.kind]:
                raise ValueError(f"{self.kind} takes {N_PARAMS[self.kind]} parameter(s)")

    @property
    def n_params(self) -> int:
        return len(self.params)

    def unitary(self) -> np.ndarray:
        k = self.kind
        if k == "CUSTOM":
            return self.matrix
        if k in ONE_QUBIT_FIXED:
            return ONE_QUBIT_FIXED[k]
        if k == "RZ":
            return rz(*self.params)
        if k == "RY":
            return ry(*self.params)
        if k == "ROT":
            return rot(*self.params)
        if k == "CRZ":
            return crz(*self.params)
        return CNOT

    def with_params(self, params) -> Gate:
        return replace(self, params=tuple(params))

    def primitive_rotations(self):
        """Decompose a parametric gate into ``exp(-i t P / 2)`` factors in application order.

        Yields ``(param_index, generator, wires)``; the generator is a matrix on ``wires``.
        """
        if self.kind == "RZ":
            yield 0, Z, self.wires
        elif self.kind == "RY":
            yield 0, Y, self.wires
        elif self.kind == "ROT":
            yield 2, Z, self.wires
            yield 1, Y, self.wires
            yield 0, Z, self.wires
        elif self.kind == "CRZ":
            yield 0, np.kron(_P1, Z), self.wires


@dataclass(frozen=True)
class CircuitIR:
    width: int
    gates: tuple[Gate, ...] = ()
    layer_boundaries: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "layer_boundaries", tuple(int(b) for b in self.layer_boundaries))
        if self.width < 1:
            raise ValueError("circuit width must be positive")
        for g in self.gates:
            if any(w < 0 or w >= self.width for w in g.wires):
                raise ValueError(f"gate {g.kind} on wires {g.wires} outside width {self.width}")
        b = self.layer_boundaries
        if any(x > y for x, y in zip(b, b[1:])) or any(x < 0 or x > len(self.gates) for x in b):
            raise ValueError("layer boundaries must be monotone gate positions")

    @property
    def n_params(self) -> int:
        return sum(g.n_params for g in self.gates)

    def params(self) -> np.ndarray:
        return np.array([p for g in self.gates for p in g.params], dtype=float)

    def then(self, other: CircuitIR) -> CircuitIR:
        """Run ``self`` first, then ``other``."""
        if other.width != self.width:
            raise ValueError("width mismatch")
        n = len(self.gates)
        return CircuitIR(
            self.width,
            self.gates + other.gates,
            self.layer_boundaries + tuple(n + b for b in other.layer_boundaries),
        )

    def insert(self, position: int, gates) -> CircuitIR:
        gates = tuple(gates)
        k = len(gates)
        bounds = tuple(b + k if b > position else b for b in self.layer_boundaries)
        return CircuitIR(self.width, self.gates[:position] + gates + self.gates[position:], bounds)

    def slice(self, start: int, stop: int | None = None) -> CircuitIR:
        return CircuitIR(self.width, self.gates[start:stop])

    def unitary(self) -> np.ndarray:
        """Dense unitary by simulating every basis state (columns of the identity)."""
        dim = 2**self.width
        return simulate(self, np.eye(dim, dtype=complex)).T


def zero_state(n: int) -> np.ndarray:
    s = np.zeros(2**n, dtype=complex)
    s[0] = 1.0
    return s


def _check_state(c: CircuitIR, state) -> np.ndarray:
    st = np.asarray(state, dtype=complex)
    if st.shape[-1] != 2**c.width:
        raise ValueError(f"state dimension {st.shape[-1]} does not match circuit width {c.width}")
    return st


def apply_matrix(state: np.ndarray, mat: np.ndarray, wires, n: int) -> np.ndarray:
    """Apply ``mat`` on ``wires`` of a batch of ``n``-qubit states shaped ``(B, 2**n)``."""
    k = len(wires)
    b = state.shape[0]
    psi = state.reshape((b,) + (2,) * n)
    axes = [1 + w for w in wires]
    out = np.tensordot(psi, mat.reshape((2,) * (2 * k)), axes=(axes, list(range(k, 2 * k))))
    # tensordot puts the gate's output axes last
    out = np.moveaxis(out, list(range(n + 1 - k, n + 1)), axes)
    return out.reshape(b, 2**n)


def _apply_gate(state: np.ndarray, g: Gate, n: int) -> np.ndarray:
    if g.kind == "CNOT":
        c, t = g.wires
        psi = state.reshape((state.shape[0],) + (2,) * n).copy()
        idx1 = [slice(None)] * (n + 1)
        idx1[1 + c] = 1
        sub = psi[tuple(idx1)]
        tax = t if t < c else t - 1
        psi[tuple(idx1)] = np.flip(sub, axis=1 + tax)
        return psi.reshape(state.shape)
    if g.kind in ("RZ", "CRZ") or (g.kind == "Z") or (g.kind == "S"):
        diag = np.diagonal(g.unitary()).reshape([2] * len(g.wires))
        # broadcasting lays the gate axes out in increasing wire order
        diag = np.transpose(diag, np.argsort(g.wires))
        shape = [1] * (n + 1)
        for w in g.wires:
            shape[1 + w] = 2
        psi = state.reshape((state.shape[0],) + (2,) * n)
        return (psi * diag.reshape(shape)).reshape(state.shape)
    return apply_matrix(state, g.unitary(), g.wires, n)


def simulate(c: CircuitIR, state) -> np.ndarray:
    st = _check_state(c, state)
    single = st.ndim == 1
    psi = st.reshape(1, -1) if single else st.copy()
    for g in c.gates:
        psi = _apply_gate(psi, g, c.width)
    return psi[0] if single else psi


def simulate_adjoint(c: CircuitIR, state) -> np.ndarray:
    """Apply ``U^dagger`` of the circuit."""
    st = _check_state(c, state)
    single = st.ndim == 1
    psi = st.reshape(1, -1) if single else st.copy()
    for g in reversed(c.gates):
        psi = apply_matrix(psi, g.unitary().conj().T, g.wires, c.width)
    return psi[0] if single else psi


def _check_hermitian(obs) -> np.ndarray:
    o = qmath.as_cmatrix(obs)
    if o.shape[0] != o.shape[1] or qmath.hs_norm(o - o.conj().T) >= 1e-10:
        raise ValueError("observable is not Hermitian")
    return o


def expectation(c: CircuitIR, state, obs) -> float | np.ndarray:
    o = _check_hermitian(obs)
    out = simulate(c, state)
    if o.shape[0] != out.shape[-1]:
        raise ValueError("observable dimension mismatch")
    vals = np.einsum("...i,ij,...j->...", out.conj(), o, out)
    return vals.real if np.ndim(vals) else float(vals.real)


def adjoint_apply(c: CircuitIR, obs) -> np.ndarray:
    """Heisenberg-picture observable ``U^dagger O U``."""
    o = _check_hermitian(obs)
    if o.shape[0] != 2**c.width:
        raise ValueError("observable dimension mismatch")
    u = c.unitary()
    out = u.conj().T @ o @ u
    return (out + out.conj().T) / 2


def povm_probabilities(state, readout_qubits, n: int | None = None) -> np.ndarray:
    """Outcome distribution of ``Pi_k = I ⊗ |k><k|`` on ``readout_qubits``.

    ``k`` is read with the first listed qubit as its most significant bit.
    """
    st = np.asarray(state, dtype=complex)
    single = st.ndim == 1
    psi = st.reshape(1, -1) if single else st
    n = int(np.log2(psi.shape[-1])) if n is None else n
    ro = [int(q) for q in readout_qubits]
    if len(set(ro)) != len(ro) or any(q < 0 or q >= n for q in ro):
        raise ValueError(f"invalid readout qubits {readout_qubits} for {n} qubits")
    p = (np.abs(psi) ** 2).reshape((psi.shape[0],) + (2,) * n)
    rest = [1 + q for q in range(n) if q not in ro]
    p = p.sum(axis=tuple(rest)) if rest else p
    # remaining axes are in increasing qubit order; reorder to the requested order
    order = np.argsort(np.argsort(ro))
    p = np.transpose(p, [0] + [1 + int(i) for i in order])
    p = p.reshape(psi.shape[0], 2 ** len(ro))
    return p[0] if single else p


def readout_projector(n: int, readout_qubits, k: int) -> np.ndarray:
    """Dense ``Pi_k`` on ``n`` qubits; slow path kept for testing."""
    r = len(readout_qubits)
    bits = [(k >> (r - 1 - i)) & 1 for i in range(r)]
    diag = np.ones(2**n)
    for idx in range(2**n):
        for q, b in zip(readout_qubits, bits):
            if ((idx >> (n - 1 - q)) & 1) != b:
                diag[idx] = 0.0
    return np.diag(diag).astype(complex)


def adjoint_gradient(c: CircuitIR, state, diag_weights, tags=None) -> np.ndarray:
    """Gradient of ``sum_b <psi_b| M_b |psi_b>`` w.r.t. gate parameters.

    ``psi_b`` is the circuit output for input ``state[b]`` and ``M_b`` is the
    diagonal observable ``diag_weights[b]``. Returns shape ``(B, P)`` where the
    columns follow the gate order (gates whose tag is not in ``tags`` are
    skipped when ``tags`` is given).
    """
    st = _check_state(c, state)
    psi = st.reshape(1, -1) if st.ndim == 1 else st
    w = np.asarray(diag_weights, dtype=float).reshape(psi.shape[0], -1)
    psi = simulate(c, psi)
    lam = psi * w
    n = c.width
    col_index = {}
    pos = 0
    for gi, g in enumerate(c.gates):
        if g.n_params and (tags is None or g.tag in tags):
            col_index[gi] = pos
            pos += g.n_params
    grad = np.zeros((psi.shape[0], pos))
    for gi in range(len(c.gates) - 1, -1, -1):
        g = c.gates[gi]
        if gi in col_index:
            # walk the primitive factors backwards: psi is the state right after each factor
            base = col_index[gi]
            prims = list(g.primitive_rotations())
            for j in range(len(prims) - 1, -1, -1):
                pidx, gen, wires = prims[j]
                gpsi = apply_matrix(psi, gen, wires, n)
                # d/dt of exp(-i t P/2): 2 Re <lam| (-i/2) P |psi> = Im <lam|P|psi>
                grad[:, base + pidx] = np.imag(np.einsum("bi,bi->b", lam.conj(), gpsi))
                t = g.params[pidx]
                undo = _primitive(gen, -t)
                psi = apply_matrix(psi, undo, wires, n)
                lam = apply_matrix(lam, undo, wires, n)
        else:
            udag = g.unitary().conj().T
            psi = apply_matrix(psi, udag, g.wires, n)
            lam = apply_matrix(lam, udag, g.wires, n)
    return grad


def _primitive(gen: np.ndarray, t: float) -> np.ndarray:
    return qmath.expm_hermitian(gen, t / 2)


def parameter_shift_gradient(c: CircuitIR, state, diag_weights) -> np.ndarray:
    """Same contract as :func:`adjoint_gradient` (all parametric gates), via ±pi/2 shifts.

    Valid for generators with eigenvalues ±1 (RZ, RY, ROT components). CRZ uses
    the four-term rule for eigenvalues {0, ±1/2}.
    """
    st = _check_state(c, state)
    psi0 = st.reshape(1, -1) if st.ndim == 1 else st
    w = np.asarray(diag_weights, dtype=float).reshape(psi0.shape[0], -1)

    def value(circ):
        out = simulate(circ, psi0)
        return np.einsum("bi,bi->b", np.abs(out) ** 2, w)

    grads = []
    gates = list(c.gates)
    for gi, g in enumerate(gates):
        for pidx in range(g.n_params):
            def shifted(delta):
                p = list(g.params)
                p[pidx] += delta
                gs = gates.copy()
                gs[gi] = g.with_params(p)
                return value(CircuitIR(c.width, gs))

            if g.kind == "CRZ":
                a, b = np.pi / 2, 3 * np.pi / 2
                c1 = (np.sqrt(2) + 1) / (4 * np.sqrt(2))
                c2 = (np.sqrt(2) - 1) / (4 * np.sqrt(2))
                grads.append(c1 * (shifted(a) - shifted(-a)) - c2 * (shifted(b) - shifted(-b)))
            else:
                grads.append((shifted(np.pi / 2) - shifted(-np.pi / 2)) / 2)
    return np.stack(grads, axis=1) if grads else np.zeros((psi0.shape[0], 0))


def to_text(c: CircuitIR) -> str:
    lines = [f"WIDTH {c.width}"]
    bounds = list(c.layer_boundaries)
    for i in range(len(c.gates) + 1):
        while bounds and bounds[0] == i:
            lines.append("LAYER")
            bounds.pop(0)
        if i == len(c.gates):
            break
        g = c.gates[i]
        parts = [g.kind, *map(str, g.wires)]
        if g.kind == "CUSTOM":
            flat = g.matrix.ravel()
            parts += [repr(float(v)) for z in flat for v in (z.real, z.imag)]
        else:
            parts += [repr(p) for p in g.params]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> CircuitIR:
    width = None
    gates: list[Gate] = []
    bounds: list[int] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kind = tok[0].upper()
        if kind == "WIDTH":
            width = int(tok[1])
        elif kind == "LAYER":
            bounds.append(len(gates))
        elif kind == "CUSTOM":
            nums = tok[1:]
            # wires are integers, matrix entries follow; 2**k wires -> 2 * 4**k numbers
            k = 1
            while 2 * (4**k) + k != len(nums):
                k += 1
                if k > 14:
                    raise ValueError(f"cannot parse CUSTOM line: {raw!r}")
            wires = tuple(int(t) for t in nums[:k])
            vals = np.array([float(t) for t in nums[k:]])
            mat = (vals[0::2] + 1j * vals[1::2]).reshape(2**k, 2**k)
            gates.append(Gate("CUSTOM", wires, matrix=mat))
        else:
            if kind not in N_WIRES:
                raise ValueError(f"unknown gate {kind!r}")
            nw = N_WIRES[kind]
            wires = tuple(int(t) for t in tok[1 : 1 + nw])
            params = tuple(float(t) for t in tok[1 + nw :])
            gates.append(Gate(kind, wires, params))
    if width is None:
        raise ValueError("missing WIDTH line")
    return CircuitIR(width, gates, bounds)


def random_circuit(width: int, n_gates: int, rng: np.random.Generator) -> CircuitIR:
    """Random circuit over the native gate set (used by tests and the verifier)."""
    gates = []
    kinds = ["RZ", "RY", "ROT", "CNOT", "CRZ", "H", "S", "X"]
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))] if width > 1 else ["RZ", "RY", "ROT", "H"][rng.integers(4)]
        nw = N_WIRES[kind]
        wires = tuple(rng.choice(width, size=nw, replace=False))
        params = tuple(rng.uniform(-np.pi, np.pi, N_PARAMS[kind]))
        gates.append(Gate(kind, wires, params))
    return CircuitIR(width, gates)
