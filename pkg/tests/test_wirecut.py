import json

import numpy as np
import pytest
from conftest import cuttable_circuit, random_hermitian
from hypothesis import given, settings
from hypothesis import strategies as st

from qcutadv import qmath, wirecut
from qcutadv.circuit import CircuitIR, Gate, simulate
from qcutadv.wirecut import Scheme, TamperSpec

seeds = st.integers(0, 2**31 - 1)
SCHEMES_M1 = [Scheme.PENG_1, Scheme.PAULI_M, Scheme.HARADA_MUB]


def uncut_value(c, psi, obs):
    out = simulate(c, psi)
    return float(np.real(out.conj() @ obs @ out))


@pytest.mark.parametrize(
    "scheme,m,kappa,n_slots",
    [
        (Scheme.PENG_1, 1, 4, 8),
        (Scheme.PAULI_M, 1, 4, 4 * 2),
        (Scheme.PAULI_M, 2, 16, 16 * 4),
        (Scheme.HARADA_MUB, 1, 3, 2 * 2 + 2),
        (Scheme.HARADA_MUB, 2, 7, 4 * 4 + 4),
    ],
)
def test_overheads_and_slot_counts(scheme, m, kappa, n_slots):
    terms = wirecut.decomposition_terms(scheme, m)
    assert wirecut.kappa(terms) == kappa
    assert sum(len(t.preparations) for t in terms) == n_slots


def test_peng_only_single_wire():
    with pytest.raises(ValueError):
        wirecut.decomposition_terms(Scheme.PENG_1, 2)
    with pytest.raises(ValueError):
        wirecut.decomposition_terms(Scheme.HARADA_MUB, 3)


@pytest.mark.parametrize("m", [1, 2])
def test_mub_unbiasedness(m):
    dim = 2**m
    bases = [np.eye(dim)] + [u for u in wirecut.mub_unitaries(m)]
    assert len(bases) == dim + 1
    for i, a in enumerate(bases):
        assert qmath.is_unitary(a)
        for b in bases[i + 1 :]:
            overlaps = np.abs(a.conj().T @ b) ** 2
            assert np.allclose(overlaps, 1 / dim, atol=1e-12)


@pytest.mark.parametrize("scheme,m", [(s, 1) for s in SCHEMES_M1] + [(Scheme.PAULI_M, 2), (Scheme.HARADA_MUB, 2)])
def test_decomposition_is_identity_channel(scheme, m, rng):
    c = CircuitIR(m + 1, [])
    plan = wirecut.cut_circuit(c, [(0, q) for q in range(m)], scheme)
    for _ in range(3):
        x = rng.standard_normal((2**m, 2**m)) + 1j * rng.standard_normal((2**m, 2**m))
        assert np.allclose(wirecut.apply_boundary_map(plan, x), x, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(SCHEMES_M1))
def test_single_cut_exact(seed, scheme):
    rng = qmath.rng_for(seed)
    c, cuts = cuttable_circuit(rng, 3, [1])
    plan = wirecut.cut_circuit(c, cuts, scheme)
    psi = qmath.random_state(8, rng)
    obs = random_hermitian(8, rng)
    assert wirecut.recombine_exact(plan, psi, obs) == pytest.approx(uncut_value(c, psi, obs), abs=1e-10)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_double_cut_schemes_agree(seed):
    rng = qmath.rng_for(seed)
    c, cuts = cuttable_circuit(rng, 4, [1, 2])
    psi = qmath.random_state(16, rng)
    obs = random_hermitian(16, rng)
    ref = uncut_value(c, psi, obs)
    vals = [wirecut.recombine_exact(wirecut.cut_circuit(c, cuts, s), psi, obs) for s in (Scheme.PAULI_M, Scheme.HARADA_MUB)]
    assert vals[0] == pytest.approx(ref, abs=1e-10)
    assert vals[1] == pytest.approx(vals[0], abs=1e-10)


def test_staggered_cut_positions(rng):
    # wire 2 is cut earlier than wire 1 and left idle until the joint position
    gates = [Gate("H", (0,)), Gate("CNOT", (0, 2)), Gate("CNOT", (0, 1)), Gate("RY", (0,), (0.4,)), Gate("CRZ", (1, 2), (0.7,)), Gate("CNOT", (2, 3))]
    c = CircuitIR(4, gates)
    plan = wirecut.cut_circuit(c, [(2, 2), (3, 1)], Scheme.HARADA_MUB)
    psi = qmath.random_state(16, rng)
    obs = random_hermitian(16, rng)
    assert wirecut.recombine_exact(plan, psi, obs) == pytest.approx(uncut_value(c, psi, obs), abs=1e-10)


def test_cut_errors():
    c = CircuitIR(3, [Gate("CNOT", (0, 1)), Gate("CNOT", (1, 2)), Gate("CNOT", (0, 2))])
    with pytest.raises(wirecut.CutError):
        wirecut.cut_circuit(c, [(1, 1)], Scheme.PENG_1)  # the CNOT(0, 2) bridges the parts
    with pytest.raises(wirecut.CutError):
        wirecut.cut_circuit(c, [(1, 0), (1, 1), (1, 2)], Scheme.PAULI_M)
    with pytest.raises(wirecut.CutError):
        wirecut.cut_circuit(c, [(1, 1), (2, 1)], Scheme.PAULI_M)
    with pytest.raises(wirecut.CutError):
        wirecut.cut_circuit(c, [(1, 5)], Scheme.PAULI_M)


def test_fragments_partition_qubits(rng):
    c, cuts = cuttable_circuit(rng, 4, [1])
    plan = wirecut.cut_circuit(c, cuts, Scheme.PENG_1)
    up, down = plan.fragments
    assert set(up.qubits) == {0, 1}
    assert set(down.qubits) == {1, 2, 3}
    assert len(up.circuit.gates) + len(down.circuit.gates) == len(c.gates)


@pytest.mark.parametrize("scheme", SCHEMES_M1)
def test_fragment_runs_reproduce_product_inputs(scheme, rng):
    c, cuts = cuttable_circuit(rng, 3, [1])
    plan = wirecut.cut_circuit(c, cuts, scheme)
    a, b = qmath.random_state(4, rng), qmath.random_state(2, rng)
    oa, ob = random_hermitian(2, rng), random_hermitian(4, rng)
    val = wirecut.recombine_fragments(plan, a, b, oa, ob)
    assert val == pytest.approx(uncut_value(c, np.kron(a, b), np.kron(oa, ob)), abs=1e-10)


@pytest.mark.parametrize("scheme", [Scheme.PENG_1, Scheme.HARADA_MUB])
def test_sampled_recombination_is_unbiased(scheme, rng):
    c, cuts = cuttable_circuit(rng, 3, [1])
    plan = wirecut.cut_circuit(c, cuts, scheme)
    psi = qmath.random_state(8, rng)
    obs = np.diag(rng.uniform(-1, 1, 8))
    exact = wirecut.recombine_exact(plan, psi, obs)
    mean, err = wirecut.recombine_sampled(plan, psi, obs, 40000, seed=5)
    assert abs(mean - exact) < 5 * err
    assert wirecut.recombine_sampled(plan, psi, obs, 1000, seed=5) == wirecut.recombine_sampled(plan, psi, obs, 1000, seed=5)


def test_identity_observable_gives_one(rng):
    c, cuts = cuttable_circuit(rng, 3, [1])
    plan = wirecut.cut_circuit(c, cuts, Scheme.HARADA_MUB)
    psi = qmath.random_state(8, rng)
    assert wirecut.recombine_exact(plan, psi, np.eye(8)) == pytest.approx(1, abs=1e-12)
    # single shots score +-kappa, only the average is 1
    mean, err = wirecut.recombine_sampled(plan, psi, np.eye(8), 20000, seed=1)
    assert abs(mean - 1) < 5 * err


def test_more_terms_cost_more_variance(rng):
    c, cuts = cuttable_circuit(rng, 3, [1])
    psi = qmath.random_state(8, rng)
    obs = np.diag(rng.uniform(-1, 1, 8))
    errs = {s: wirecut.recombine_sampled(wirecut.cut_circuit(c, cuts, s), psi, obs, 20000, 3)[1] for s in (Scheme.PENG_1, Scheme.HARADA_MUB)}
    assert errs[Scheme.HARADA_MUB] < errs[Scheme.PENG_1]


@pytest.mark.parametrize("scheme,m", [(Scheme.PENG_1, 1), (Scheme.HARADA_MUB, 1), (Scheme.PAULI_M, 2), (Scheme.HARADA_MUB, 2)])
def test_uniform_tamper_is_an_inserted_gate(scheme, m, rng):
    c, cuts = cuttable_circuit(rng, m + 2, list(range(1, m + 1)))
    plan = wirecut.cut_circuit(c, cuts, scheme)
    u = qmath.haar_unitary(2**m, rng)
    tampered = wirecut.tamper(plan, TamperSpec.uniform_unitary(u))
    attacked = c.insert(plan.position, [Gate("CUSTOM", plan.cut_qubits, matrix=u)])
    psi = qmath.random_state(2**c.width, rng)
    obs = random_hermitian(2**c.width, rng)
    assert wirecut.recombine_exact(tampered, psi, obs) == pytest.approx(uncut_value(attacked, psi, obs), abs=1e-10)
    report = wirecut.cp_tp_check(wirecut.effective_channel(tampered)[1], m)
    assert report.tp and report.cp


def test_tamper_dimension_checked():
    plan = wirecut.cut_circuit(CircuitIR(2), [(0, 0)], Scheme.PENG_1)
    with pytest.raises(wirecut.CutError):
        wirecut.tamper(plan, TamperSpec.uniform_unitary(np.eye(4)))


def test_choi_of_untouched_cut_is_identity_channel():
    plan = wirecut.cut_circuit(CircuitIR(2), [(0, 0)], Scheme.HARADA_MUB)
    superop, choi = wirecut.effective_channel(plan)
    assert np.allclose(superop, np.eye(4))
    omega = np.zeros(4)
    omega[[0, 3]] = 1
    assert np.allclose(choi, np.outer(omega, omega))


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from([(Scheme.PENG_1, 1), (Scheme.HARADA_MUB, 1), (Scheme.PAULI_M, 1), (Scheme.HARADA_MUB, 2)]))
def test_per_preparation_tamper_stays_trace_preserving(seed, scheme_m):
    scheme, m = scheme_m
    rng = qmath.rng_for(seed)
    plan = wirecut.cut_circuit(CircuitIR(m + 1), [(0, q) for q in range(m)], scheme)
    slots = plan.slots()
    chosen = rng.choice(len(slots), size=int(rng.integers(1, len(slots) + 1)), replace=False)
    spec = TamperSpec.per_preparation({slots[i]: qmath.haar_unitary(2**m, rng) for i in chosen})
    report = wirecut.cp_tp_check(wirecut.effective_channel(wirecut.tamper(plan, spec))[1], m)
    assert report.tp


def test_search_finds_non_cp_tampering():
    plan = wirecut.cut_circuit(CircuitIR(2), [(0, 0)], Scheme.HARADA_MUB)
    spec, report, tries = wirecut.search_non_cp(plan, 10_000, seed=0)
    assert report.min_eigenvalue < -1e-6
    assert report.tp and not report.cp
    assert tries <= 10_000
    again = wirecut.cp_tp_check(wirecut.effective_channel(wirecut.tamper(plan, spec))[1], 1)
    assert again.min_eigenvalue == pytest.approx(report.min_eigenvalue)


def test_plan_json_round_trip(rng):
    c, cuts = cuttable_circuit(rng, 4, [1, 2])
    plan = wirecut.cut_circuit(c, cuts, Scheme.HARADA_MUB)
    plan = wirecut.tamper(plan, TamperSpec.per_preparation({(0, 1): qmath.haar_unitary(4, rng)}))
    back = wirecut.plan_from_json(json.loads(wirecut.dumps_plan(plan)))
    psi = qmath.random_state(16, rng)
    obs = random_hermitian(16, rng)
    assert back.kappa == plan.kappa
    assert wirecut.recombine_exact(back, psi, obs) == pytest.approx(wirecut.recombine_exact(plan, psi, obs), abs=1e-12)


def test_no_cut_plan_is_plain_simulation(rng):
    c, _ = cuttable_circuit(rng, 3, [1])
    plan = wirecut.cut_circuit(c, [], None)
    psi = qmath.random_state(8, rng)
    obs = random_hermitian(8, rng)
    assert plan.kappa == 1
    assert wirecut.recombine_exact(plan, psi, obs) == pytest.approx(uncut_value(c, psi, obs))
