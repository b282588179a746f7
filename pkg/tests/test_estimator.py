import numpy as np
import pytest

from softspell.estimator import NotFittedError, SpellNetCorrector, check_distribution_matrices
from softspell.spellnet import word_to_target


def tiny_data():
    words = ["SAGE", "LUD", "NIMM", "HAND"]
    X = np.stack([word_to_target(w) for w in words])  # clean one-hot inputs
    return X, words


def test_get_params_round_trip():
    est = SpellNetCorrector(epochs=7, learning_rate=0.01)
    params = est.get_params()
    assert params["epochs"] == 7
    assert params["learning_rate"] == 0.01
    clone = SpellNetCorrector(**params)
    assert clone.get_params() == params


def test_set_params_returns_self_and_validates():
    est = SpellNetCorrector()
    assert est.set_params(epochs=3) is est
    assert est.epochs == 3
    with pytest.raises(ValueError):
        est.set_params(not_a_param=1)


def test_sklearn_clone_compatibility():
    sklearn_base = pytest.importorskip("sklearn.base")
    est = SpellNetCorrector(epochs=2, random_state=7)
    cloned = sklearn_base.clone(est)
    assert cloned.get_params() == est.get_params()


def test_predict_before_fit_raises():
    X, _ = tiny_data()
    with pytest.raises(NotFittedError):
        SpellNetCorrector().predict(X)


def test_fit_predict_with_word_targets():
    X, words = tiny_data()
    est = SpellNetCorrector(epochs=0, batch_size=4, random_state=0)
    est.fit(X, words)
    # zero-head initialization passes clean inputs straight through
    assert list(est.predict(X)) == words
    assert est.score(X, words) == 1.0


def test_fit_predict_with_matrix_targets():
    X, words = tiny_data()
    y = np.stack([word_to_target(w) for w in words])
    est = SpellNetCorrector(epochs=5, batch_size=4, random_state=1)
    est.fit(X, y)
    assert len(est.history_) == 5
    proba = est.predict_proba(X)
    assert proba.shape == (4, 36, 10)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-12)


def test_fit_is_deterministic():
    X, words = tiny_data()
    a = SpellNetCorrector(epochs=4, batch_size=4, random_state=3).fit(X, words)
    b = SpellNetCorrector(epochs=4, batch_size=4, random_state=3).fit(X, words)
    for pa, pb in zip(a.net_.parameters(), b.net_.parameters()):
        assert np.array_equal(pa.data, pb.data)


def test_input_validation():
    with pytest.raises(ValueError):
        check_distribution_matrices(np.zeros((2, 35, 10)))
    bad = np.zeros((1, 36, 10))
    with pytest.raises(ValueError):
        check_distribution_matrices(bad)  # columns sum to 0
    good = np.stack([word_to_target("SAGE")])
    assert check_distribution_matrices(good).shape == (1, 36, 10)
    negative = good.copy()
    negative[0, 0, 0] = -0.5
    negative[0, 1, 0] = 1.5
    with pytest.raises(ValueError):
        check_distribution_matrices(negative)


def test_fit_rejects_mismatched_targets():
    X, _ = tiny_data()
    with pytest.raises(ValueError):
        SpellNetCorrector(epochs=1).fit(X, ["SAGE"])
