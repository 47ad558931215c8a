import numpy as np
import pytest

from qcutadv import qmath
from qcutadv.circuit import N_PARAMS, N_WIRES, CircuitIR, Gate

ACCEPTANCE: dict[str, tuple[bool, str]] = {}

KINDS = ["RZ", "RY", "ROT", "CNOT", "CRZ", "H", "S", "X"]


def random_gate(rng, wires_pool) -> Gate:
    pool = list(wires_pool)
    kinds = KINDS if len(pool) > 1 else ["RZ", "RY", "ROT", "H", "S"]
    kind = kinds[rng.integers(len(kinds))]
    wires = tuple(int(w) for w in rng.choice(pool, size=N_WIRES[kind], replace=False))
    return Gate(kind, wires, tuple(rng.uniform(-np.pi, np.pi, N_PARAMS[kind])))


def cuttable_circuit(rng, width: int, cut_qubits, n_up: int = 8, n_down: int = 8):
    """Random circuit split by ``cut_qubits`` at one gate position.

    Upstream gates use qubits ``0..max(cut)``; downstream gates use the cut
    qubits and everything below them. Returns ``(circuit, cuts)``.
    """
    cut_qubits = list(cut_qubits)
    up_pool = list(range(0, max(cut_qubits) + 1))
    down_pool = sorted(set(cut_qubits) | set(range(max(cut_qubits) + 1, width)))
    anchor = cut_qubits[0]
    # tie every non-cut wire to a cut wire so fragment membership is fixed
    gates = [Gate("CNOT", (q, anchor)) for q in up_pool if q not in cut_qubits]
    gates += [random_gate(rng, up_pool) for _ in range(n_up)]
    pos = len(gates)
    gates += [random_gate(rng, down_pool) for _ in range(n_down)]
    gates += [Gate("CNOT", (anchor, q)) for q in down_pool if q not in cut_qubits]
    # single-qubit work on the upstream-only wires after the cut keeps them in the upstream fragment
    rest = [q for q in up_pool if q not in cut_qubits]
    if rest:
        gates.append(Gate("RY", (rest[0],), (float(rng.uniform(-3, 3)),)))
    return CircuitIR(width, gates), [(pos, q) for q in cut_qubits]


def embed(mat, wires, n) -> np.ndarray:
    """Dense operator of ``mat`` on ``wires`` of ``n`` qubits, by explicit index arithmetic."""
    dim = 2**n
    k = len(wires)
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub_in = sum(bits[w] << (k - 1 - i) for i, w in enumerate(wires))
        for sub_out in range(2**k):
            amp = mat[sub_out, sub_in]
            if amp == 0:
                continue
            nb = list(bits)
            for i, w in enumerate(wires):
                nb[w] = (sub_out >> (k - 1 - i)) & 1
            row = sum(b << (n - 1 - q) for q, b in enumerate(nb))
            out[row, col] += amp
    return out


def dense_unitary(c: CircuitIR) -> np.ndarray:
    u = np.eye(2**c.width, dtype=complex)
    for g in c.gates:
        u = embed(g.unitary(), g.wires, c.width) @ u
    return u


def random_hermitian(dim, rng) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2


@pytest.fixture
def rng():
    return qmath.rng_for(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
