import json

import numpy as np
import pytest

import okr


def gp_stream(n=30, n_test=20, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(1, n))
    Y = np.sin(6.0 * X) + 0.1 * rng.standard_normal((1, n))
    Xs = rng.uniform(0.0, 1.0, size=(1, n_test))
    return X, Y, Xs


def ridge(K, Ks, Y, gamma):
    return Y @ np.linalg.solve(gamma * np.eye(K.shape[0]) + K, Ks)


def test_offline_predict_matches_numpy():
    X, Y, Xs = gp_stream()
    k = okr.Kernel.rbf(0.1)
    d2 = (X.T - Xs) ** 2
    Ks = np.exp(-d2 / 0.1)
    K = np.exp(-((X.T - X) ** 2) / 0.1)
    np.testing.assert_allclose(okr.offline_predict(k, X, Y, 0.5, Xs), ridge(K, Ks, Y, 0.5), atol=1e-10)
    np.testing.assert_allclose(k.gram(X, Xs), Ks, atol=1e-14)


def test_corrected_targets_reproduce_offline():
    X, Y, Xs = gp_stream()
    k = okr.Kernel.from_config("random_fourier", 1, seed=3, bandwidth=0.1, features=200)
    Yc = okr.corrected_targets(k, X, Y, 0.1, 0.5)
    on = okr.online_closed_form(k, X, Yc, 0.1, 0.0, Xs)
    np.testing.assert_allclose(on, okr.offline_predict(k, X, Y, 0.5, Xs), atol=1e-8)
    W = okr.sgd_run(k, X, Yc, 0.1)
    np.testing.assert_allclose(W @ k.features(Xs), on, atol=1e-8)


def test_shift_and_correction_invert_each_other():
    X, Y, _ = gp_stream(seed=1)
    k = okr.Kernel.rbf(0.1)
    Ye = okr.effective_targets(k, X, Y, 0.3, 1.0)
    np.testing.assert_allclose(okr.corrected_targets(k, X, Ye, 0.3, 1.0), Y, atol=1e-10)


def test_iterative_correction_shape_and_causality():
    X, Y, _ = gp_stream(n=24, seed=2)
    K = okr.Kernel.rbf(0.1).gram(X)
    Z = okr.iterative_correction_run(K, Y, 0.5, 1.0, gamma_o=0.1, chunk=6)
    assert Z.shape == Y.shape
    Y2 = Y.copy()
    Y2[:, 12:] = 0.0
    Z2 = okr.iterative_correction_run(K, Y2, 0.5, 1.0, gamma_o=0.1, chunk=6)
    np.testing.assert_array_equal(Z[:, :12], Z2[:, :12])


def test_ntk_matches_jacobians():
    widths = [3, 5, 2]
    w = okr.init_weights(widths, "tanh", seed=1)
    X = np.random.default_rng(0).standard_normal((3, 4))
    J = [okr.mlp_jacobian(widths, "tanh", w, X[:, i]) for i in range(4)]
    (G,) = okr.empirical_ntk_gram(widths, "tanh", w, X)
    expect = np.array([[np.mean(np.sum(J[i] * J[j], axis=1)) for j in range(4)] for i in range(4)])
    np.testing.assert_allclose(G, expect, atol=1e-12)
    assert okr.mlp_forward(widths, "tanh", w, X).shape == (2, 4)


def test_tasks_and_experiments():
    task = okr.generate_task(json.dumps({"kind": "cluster", "cluster": {"n_train": 40, "n_test": 20}}))
    assert task["classification"]
    assert task["train"]["X"].shape == (20, 40)
    cfg = {"task": {"gp": {"n_train": 20, "n_test": 10}}, "learners": ["offline", "online_true"], "seeds": 2}
    out = okr.run_experiment(json.dumps(cfg))
    curves = json.loads(out["curves"])
    assert {c["learner"] for c in curves} == {"offline", "online_true"}
    assert len(json.loads(out["summary"])) == 4


def test_equivalence_report():
    X, Y, Xs = gp_stream()
    k = okr.Kernel.from_config("random_fourier", 1, bandwidth=0.1)
    checks = okr.equivalence_report(k, X, Y, Xs, eta=0.5, gamma=1.0, gamma_o=0.1)
    assert [c["name"] for c in checks][:2] == ["sgd_online", "sgd_minibatch"]
    assert all(c["passed"] for c in checks)


def test_errors_are_typed():
    with pytest.raises(okr.InvalidArgument):
        okr.Kernel.rbf(0.0)
    with pytest.raises(okr.DimensionError):
        okr.offline_predict(okr.Kernel.rbf(1.0), np.zeros((1, 3)), np.zeros((1, 2)), 1.0, np.zeros((1, 1)))
    assert issubclass(okr.NumericalError, okr.Error)
