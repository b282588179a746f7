"""End-to-end word correction: simulate, assemble, look up, correct.

A word is spelled letter by letter through the synthetic channel; the
per-letter distributions are reassembled and passed through up to three
stages: dictionary lookup on the argmax word, the correction network, and
the statistical corrector. Every result carries a provenance tag naming
the stage that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import alphabet
from .channel import ConfusionModel, Variant, sample_logits, to_distribution
from .lexicon import Lexicon
from .spellnet import PredictionError, SpellNet, assemble_columns, decode_output, forward
from .statistical import NorvigCorrector, norvig_correct

REPRESENTATIONS = ("softmax", "hardmax")


@dataclass(frozen=True)
class WordSample:
    """One simulated spelling: truth symbols plus one distribution per letter."""

    truth: tuple[str, ...]
    distributions: np.ndarray  # (len(truth), 36), OOV entry 0
    variant: Variant
    channel_seed: int

    @property
    def word(self) -> str:
        return alphabet.detokenize(self.truth)


def simulate_word(
    word: str, model: ConfusionModel, variant: Variant, seed: int
) -> WordSample:
    """Spell ``word`` through the channel, one distribution per symbol."""
    symbols = alphabet.tokenize(word)
    rng = np.random.default_rng(seed)
    rows = []
    for symbol in symbols:
        logits = sample_logits(model, symbol, rng)
        rows.append(to_distribution(logits, variant, rng, model.temperature))
    return WordSample(symbols, np.stack(rows), variant, seed)


def argmax_word(sample: WordSample) -> str:
    """Per-position argmax over the 35 gesture entries, detokenized."""
    indices = sample.distributions[:, : alphabet.NUM_GESTURES].argmax(axis=1)
    return alphabet.detokenize(alphabet.symbol_at(int(i)) for i in indices)


@dataclass(frozen=True)
class PipelineOptions:
    use_dictionary: bool = True
    use_net: bool = False
    use_norvig: bool = False
    test_representation: str = "softmax"

    def __post_init__(self):
        if not (self.use_dictionary or self.use_net or self.use_norvig):
            raise ValueError("at least one correction stage must be enabled")
        if self.test_representation not in REPRESENTATIONS:
            raise ValueError(f"test_representation must be one of {REPRESENTATIONS}")


@dataclass(frozen=True)
class CorrectionResult:
    word: str
    provenance: str  # dictionary | net | net+norvig | norvig | passthrough


def net_input(sample: WordSample, representation: str) -> np.ndarray:
    """Assemble the 36x10 network input for a sample under a test representation."""
    if representation == "softmax":
        columns = [row for row in sample.distributions]
    else:
        columns = []
        for row in sample.distributions:
            hard = np.zeros(alphabet.NUM_SYMBOLS)
            hard[int(row[: alphabet.NUM_GESTURES].argmax())] = 1.0
            columns.append(hard)
    return assemble_columns(columns)


def correct(
    sample: WordSample,
    lexicon: Lexicon,
    net: SpellNet | None,
    options: PipelineOptions,
    corrector: NorvigCorrector | None = None,
    net_output: np.ndarray | None = None,
) -> CorrectionResult:
    """Run the enabled stages in order and tag the result with its source.

    Stage errors degrade to the previous stage's word, so the function is
    total. Passing a prepared :class:`NorvigCorrector` avoids re-enumerating
    edit candidates per word; it must wrap the same lexicon. ``net_output``
    may carry a precomputed ``forward(net, net_input(sample, ...))`` matrix
    so batch evaluations can share one forward pass.
    """
    if options.use_net and net is None and net_output is None:
        raise ValueError("options enable the network but no net was given")
    word = argmax_word(sample)
    if options.use_dictionary and lexicon.contains(word):
        return CorrectionResult(word, "dictionary")
    net_applied = False
    if options.use_net:
        if net_output is None:
            net_output = forward(net, net_input(sample, options.test_representation))
        try:
            word = decode_output(net_output)
            net_applied = True
        except PredictionError:
            pass
        if net_applied and lexicon.contains(word):
            return CorrectionResult(word, "net")
    if options.use_norvig:
        if corrector is not None:
            corrected = corrector.correct(word)
        else:
            corrected = norvig_correct(word, lexicon)
        return CorrectionResult(corrected, "net+norvig" if net_applied else "norvig")
    return CorrectionResult(word, "passthrough")


def expected_word_accuracy(char_accuracy: float, length: int) -> float:
    """Closed-form word accuracy under per-letter independence: p ** n."""
    if not 0.0 <= char_accuracy <= 1.0:
        raise ValueError("char_accuracy must lie in [0, 1]")
    if length < 1:
        raise ValueError("length must be positive")
    return char_accuracy**length
