"""scikit-learn style front door for the correction network.

``SpellNetCorrector`` wraps network construction, training, and word
decoding behind the fit/predict/get_params contract so the corrector
drops into sklearn pipelines, ``clone``, and grid searches without this
package depending on sklearn itself.
"""

from __future__ import annotations

import inspect

import numpy as np

from . import alphabet
from .spellnet import (
    PredictionError,
    SpellNetConfig,
    TrainConfig,
    TrainingPair,
    build,
    forward,
    predict_word,
    train,
    word_to_target,
)


class NotFittedError(RuntimeError):
    """predict/score called before fit."""


def check_distribution_matrices(X) -> np.ndarray:
    """Validate and coerce inputs to a (n, 36, 10) float64 array.

    Accepts a single 36x10 matrix or a sequence/array of them. Columns must
    be finite probability vectors (non-negative, summing to 1 within 1e-6).
    """
    array = np.asarray(X, dtype=np.float64)
    if array.ndim == 2:
        array = array[None]
    expected = (alphabet.NUM_SYMBOLS, alphabet.MAX_WORD_LENGTH)
    if array.ndim != 3 or array.shape[1:] != expected:
        raise ValueError(f"expected (n,) + {expected} matrices, got shape {np.shape(X)}")
    if not np.all(np.isfinite(array)):
        raise ValueError("input matrices contain non-finite values")
    if np.any(array < 0):
        raise ValueError("input matrices contain negative probabilities")
    sums = array.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > 1e-6:
        raise ValueError("input columns must each sum to 1")
    return array


def _targets_from_y(y, n: int) -> np.ndarray:
    if isinstance(y, np.ndarray) and y.ndim == 3:
        targets = np.asarray(y, dtype=np.float64)
    elif len(y) > 0 and isinstance(y[0], str):
        targets = np.stack([word_to_target(word) for word in y])
    else:
        targets = np.asarray(y, dtype=np.float64)
        if targets.ndim == 2:
            targets = targets[None]
    expected = (n, alphabet.NUM_SYMBOLS, alphabet.MAX_WORD_LENGTH)
    if targets.shape != expected:
        raise ValueError(f"targets must be words or matrices of shape {expected}")
    return targets


class SpellNetCorrector:
    """Residual convolutional word corrector with an estimator interface.

    Parameters mirror the network and training defaults. ``fit`` expects
    column-stochastic 36x10 matrices and either target matrices of the same
    shape or plain words; ``predict`` returns decoded words, falling back to
    the input's argmax letters when the network abstains with an OOV column.
    """

    def __init__(
        self,
        num_residual_blocks: int = 2,
        block_width: int = 64,
        block_kernel: int = 3,
        head_kernel: int = 1,
        leaky_slope: float = 0.01,
        epochs: int = 100,
        batch_size: int = 1024,
        learning_rate: float = 0.001,
        random_state: int = 0,
    ):
        self.num_residual_blocks = num_residual_blocks
        self.block_width = block_width
        self.block_kernel = block_kernel
        self.head_kernel = head_kernel
        self.leaky_slope = leaky_slope
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    @classmethod
    def _param_names(cls) -> list[str]:
        signature = inspect.signature(cls.__init__)
        return [name for name in signature.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "SpellNetCorrector":
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"unknown parameter {name!r} for SpellNetCorrector")
            setattr(self, name, value)
        return self

    def _config(self) -> SpellNetConfig:
        return SpellNetConfig(
            num_residual_blocks=self.num_residual_blocks,
            block_width=self.block_width,
            block_kernel=self.block_kernel,
            head_kernel=self.head_kernel,
            leaky_slope=self.leaky_slope,
        )

    def fit(self, X, y) -> "SpellNetCorrector":
        inputs = check_distribution_matrices(X)
        targets = _targets_from_y(y, inputs.shape[0])
        dataset = [TrainingPair(inp, tgt) for inp, tgt in zip(inputs, targets)]
        self.net_ = build(self._config(), np.random.default_rng(self.random_state))
        self.history_ = train(
            self.net_,
            dataset,
            TrainConfig(
                epochs=self.epochs,
                batch_size=self.batch_size,
                learning_rate=self.learning_rate,
                seed=self.random_state,
            ),
        )
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "net_"):
            raise NotFittedError("call fit before predict/score")

    def predict_proba(self, X) -> np.ndarray:
        """Corrected 36x10 column-stochastic matrices, shape (n, 36, 10)."""
        self._check_fitted()
        return forward(self.net_, check_distribution_matrices(X))

    def predict(self, X) -> np.ndarray:
        """Corrected words (unicode array of length n)."""
        self._check_fitted()
        inputs = check_distribution_matrices(X)
        words = []
        for matrix in inputs:
            try:
                words.append(predict_word(self.net_, matrix))
            except PredictionError:
                indices = matrix.argmax(axis=0)
                kept = [int(i) for i in indices if i != alphabet.OOV_INDEX]
                words.append(alphabet.detokenize(alphabet.symbol_at(i) for i in kept))
        return np.asarray(words)

    def score(self, X, y) -> float:
        """Mean per-word character accuracy against the true words."""
        from .evaluation import character_accuracy

        self._check_fitted()
        predictions = self.predict(X)
        if len(y) > 0 and isinstance(y[0], str):
            truths = [w.upper() for w in y]
        else:
            targets = _targets_from_y(y, len(predictions))
            truths = [_decode_target(t) for t in targets]
        scores = [float(character_accuracy(p, t)) for p, t in zip(predictions, truths)]
        return float(np.mean(scores))


def _decode_target(target: np.ndarray) -> str:
    indices = target.argmax(axis=0)
    kept = [int(i) for i in indices if i != alphabet.OOV_INDEX]
    return alphabet.detokenize(alphabet.symbol_at(i) for i in kept)
