import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcutadv import qmath
from qcutadv.circuit import readout_projector
from qcutadv.classifier import (
    ClassifierModel,
    LabeledDataset,
    Schedule,
    amplitude_encode,
    build_ansatz,
    cross_entropy,
    input_states,
    load_model,
    loss_and_gradient,
    predict,
    predict_probs,
    save_model,
    train,
)
from qcutadv.data import make_synthetic


def fd_gradient(model, x, y, h=1e-5):
    out = np.zeros_like(model.theta)
    for idx in np.ndindex(model.theta.shape):
        plus, minus = model.copy(), model.copy()
        plus.theta[idx] += h
        minus.theta[idx] -= h
        out[idx] = (loss_and_gradient(plus, x, y)[0] - loss_and_gradient(minus, x, y)[0]) / (2 * h)
    return out


def test_register_sizes():
    m = ClassifierModel.initialise(4, 4, 2, seed=0)
    assert (m.d_a, m.d_plus, m.readout) == (2, 6, (4, 5))
    assert m.theta.shape == (2, 6, 3)
    with pytest.raises(ValueError):
        ClassifierModel.initialise(4, 3, 2, seed=0)


def test_initialisation_is_seeded():
    a = ClassifierModel.initialise(3, 2, 2, seed=4)
    b = ClassifierModel.initialise(3, 2, 2, seed=4)
    assert np.array_equal(a.theta, b.theta)
    assert np.all((a.theta >= 0) & (a.theta < 2 * np.pi))


def test_amplitude_encoding_pads_and_normalises():
    v = amplitude_encode([3.0, 4.0, 0.0], 2)
    assert np.allclose(v, [0.6, 0.8, 0, 0])
    with pytest.raises(ValueError):
        amplitude_encode(np.zeros(4), 2)
    with pytest.raises(ValueError):
        amplitude_encode(np.ones(5), 2)


def test_ansatz_layout():
    m = ClassifierModel.initialise(3, 2, 3, seed=0)
    c = build_ansatz(m)
    assert len(c.layer_boundaries) == m.layers + 1
    per_layer = c.gates[: c.layer_boundaries[1]]
    assert [g.kind for g in per_layer] == ["ROT"] * 4 + ["CNOT"] * 4
    assert [g.wires for g in per_layer[4:]] == [(0, 1), (1, 2), (2, 3), (3, 0)]


def test_two_qubit_ring_keeps_both_cnots():
    c = build_ansatz(ClassifierModel.initialise(1, 2, 1, seed=0))
    assert [g.wires for g in c.gates if g.kind == "CNOT"] == [(0, 1), (1, 0)]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.sampled_from([2, 4]), st.integers(1, 3))
def test_probabilities_are_normalised(seed, d, k, layers):
    m = ClassifierModel.initialise(d, k, layers, seed)
    x = qmath.rng_for(seed).uniform(0.01, 1, (5, 2**d))
    p = predict_probs(m, x)
    assert p.shape == (5, k)
    assert np.allclose(p.sum(axis=1), 1, atol=1e-12)
    assert np.all(p >= -1e-15)


def test_probabilities_match_dense_projectors(rng):
    m = ClassifierModel.initialise(2, 4, 2, seed=1)
    x = rng.uniform(0, 1, 4)
    u = build_ansatz(m).unitary()
    psi = u @ input_states(m, x)[0]
    expect = [np.real(psi.conj() @ readout_projector(m.d_plus, m.readout, k) @ psi) for k in range(4)]
    assert np.allclose(predict_probs(m, x), expect)


@pytest.mark.parametrize("seed", range(6))
def test_gradient_matches_finite_differences(seed):
    rng = qmath.rng_for(seed, 3)
    d = int(rng.integers(2, 5))
    k = int(rng.choice([2, 4]))
    m = ClassifierModel.initialise(d, k, int(rng.integers(1, 5)), seed)
    x = rng.uniform(0, 1, (4, 2**d))
    y = rng.integers(0, k, 4)
    _, g = loss_and_gradient(m, x, y)
    fd = fd_gradient(m, x, y)
    assert np.max(np.abs(g - fd)) / np.max(np.abs(fd)) < 1e-5
    _, ps = loss_and_gradient(m, x, y, method="parameter_shift")
    assert np.allclose(ps, g, atol=1e-12)


def test_last_rz_before_readout_has_no_gradient(rng):
    # the final RZ of the last layer commutes with computational-basis readout
    m = ClassifierModel.initialise(3, 2, 2, seed=2)
    _, g = loss_and_gradient(m, rng.uniform(0, 1, (6, 8)), rng.integers(0, 2, 6))
    assert np.max(np.abs(g[-1, :, 0])) < 1e-12
    assert np.max(np.abs(g[-1, :, 1])) > 1e-6


def test_cross_entropy_floor():
    assert cross_entropy(np.array([0.0, 1.0]), 0) == pytest.approx(-np.log(1e-12))


def test_unknown_gradient_method():
    m = ClassifierModel.initialise(2, 2, 1, seed=0)
    with pytest.raises(ValueError):
        loss_and_gradient(m, np.ones((1, 4)), [0], method="magic")


def test_schedule_stages():
    s = Schedule("adam", [(2, 0.1), (3, 0.01)], 8, 0)
    assert s.epochs == 5
    assert [s.lr_at(e) for e in range(5)] == [0.1, 0.1, 0.01, 0.01, 0.01]


def test_dataset_rejects_zero_rows():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 4)), np.array([0, 1]), np.array(["train", "train"]))


def test_training_smoke_reaches_high_accuracy():
    ds = make_synthetic(200, 64, 2, seed=0)
    m = ClassifierModel.initialise(6, 2, 5, seed=1)
    trained, metrics = train(m, ds, Schedule("adam", [(20, 0.1)], 64, 0))
    assert len(metrics) == 20
    assert metrics[-1]["train_accuracy"] >= 0.95
    assert metrics[-1]["train_loss"] < metrics[0]["train_loss"]
    assert not np.array_equal(trained.theta, m.theta)


def test_training_is_deterministic():
    ds = make_synthetic(64, 16, 2, seed=3)
    m = ClassifierModel.initialise(4, 2, 2, seed=1)
    sched = Schedule("adam", [(2, 0.1)], 16, 7)
    a, _ = train(m, ds, sched)
    b, _ = train(m, ds, sched)
    assert np.array_equal(a.theta, b.theta)


def test_checkpoint_round_trip(tmp_path, rng):
    m = ClassifierModel.initialise(3, 4, 2, seed=9)
    path = tmp_path / "m.json"
    save_model(path, m, Schedule(), seed=9)
    back = load_model(path)
    x = rng.uniform(0, 1, (3, 8))
    assert np.array_equal(back.theta, m.theta)
    assert np.array_equal(predict(back, x), predict(m, x))
