"""Metrics and the ablation harness.

Accuracies are exact integer ratios so reports reproduce bit-for-bit. The
harness trains one network per (training variant, seed), shares it across
configurations that differ only in the Norvig stage, and evaluates every
configuration on a common held-out word sample disjoint from the training
words.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import alphabet
from .channel import AlphaScaled, ConfusionModel, Hardmax, MixHardSoft, NoiseAdded, Softmax, Variant
from .lexicon import Lexicon
from .pipeline import PipelineOptions, WordSample, argmax_word, correct, net_input, simulate_word
from .spellnet import (
    SpellNet,
    SpellNetConfig,
    TrainConfig,
    assemble_columns,
    build,
    forward,
    generate_dataset,
    train,
    word_to_target,
)
from .statistical import NorvigCorrector


def character_matches(predicted: str, truth: str) -> tuple[int, int]:
    """(matching positions, truth length) over aligned symbol sequences.

    Positions beyond the prediction's length count as mismatches; positions
    beyond the truth's length are ignored.
    """
    pred = alphabet.scan_symbols(predicted.upper())
    true = alphabet.scan_symbols(truth.upper())
    matches = sum(1 for i, s in enumerate(true) if i < len(pred) and pred[i] == s)
    return matches, len(true)


def character_accuracy(predicted, truth=None) -> Fraction:
    """Positional match rate; pass two words or one iterable of (pred, truth)."""
    if truth is not None:
        matches, total = character_matches(predicted, truth)
        return Fraction(matches, total)
    num = den = 0
    for pred, true in predicted:
        matches, total = character_matches(pred, true)
        num += matches
        den += total
    return Fraction(num, den)


def word_accuracy(pairs: Iterable[tuple[str, str]]) -> Fraction:
    """Exact-match fraction over (predicted, truth) pairs."""
    num = den = 0
    for pred, true in pairs:
        num += int(pred.upper() == true.upper())
        den += 1
    return Fraction(num, den)


_LABELS: dict[str, tuple[Variant | None, str]] = {
    "H/H": (Hardmax(), "hardmax"),
    "S/S": (Softmax(), "softmax"),
    "H/S": (Hardmax(), "softmax"),
    "Mix/S": (MixHardSoft(), "softmax"),
    "αS/S": (AlphaScaled(), "softmax"),
    "S+ε/S": (NoiseAdded(), "softmax"),
    "N": (None, "softmax"),
}

_KEYS = {
    "hh": "H/H",
    "ss": "S/S",
    "hs": "H/S",
    "mix": "Mix/S",
    "alpha": "αS/S",
    "noise": "S+ε/S",
    "n": "N",
}


@dataclass(frozen=True)
class AblationConfig:
    """One table cell: training variant, test representation, Norvig toggle."""

    label: str
    train_variant: Variant | None
    test_representation: str
    use_norvig: bool = False

    def __post_init__(self):
        if self.label not in _LABELS:
            raise ValueError(f"unknown config label {self.label!r}; use one of {sorted(_LABELS)}")
        expected_variant, expected_repr = _LABELS[self.label]
        if type(self.train_variant) is not type(expected_variant):
            raise ValueError(f"label {self.label} requires train variant {expected_variant!r}")
        if self.test_representation != expected_repr:
            raise ValueError(f"label {self.label} requires test representation {expected_repr!r}")
        if self.label == "N" and not self.use_norvig:
            raise ValueError("config N corrects with Norvig only; use_norvig must be true")

    @property
    def uses_net(self) -> bool:
        return self.train_variant is not None

    @property
    def display_label(self) -> str:
        if self.use_norvig and self.label != "N":
            return self.label + "+N"
        return self.label


def config_from_label(label: str, use_norvig: bool = False) -> AblationConfig:
    if label not in _LABELS:
        raise ValueError(f"unknown config label {label!r}; use one of {sorted(_LABELS)}")
    variant, representation = _LABELS[label]
    return AblationConfig(label, variant, representation, use_norvig or label == "N")


def config_from_key(key: str) -> AblationConfig:
    """Parse CLI keys: hh, ss, hs, mix, alpha, noise, n, plus a '+n' suffix."""
    base, _, suffix = key.strip().lower().partition("+")
    if base not in _KEYS or suffix not in ("", "n"):
        raise ValueError(f"unknown config key {key!r}")
    return config_from_label(_KEYS[base], use_norvig=suffix == "n")


def standard_configs(use_norvig: bool = False) -> list[AblationConfig]:
    """The six train/test variants of the ablation, in table order."""
    return [
        config_from_label(label, use_norvig)
        for label in ("H/H", "S/S", "H/S", "Mix/S", "αS/S", "S+ε/S")
    ]


@dataclass(frozen=True)
class ConfigOutcome:
    label: str
    seed: int
    char_correct: int
    char_total: int
    word_correct: int
    word_total: int

    @property
    def char_accuracy(self) -> Fraction:
        return Fraction(self.char_correct, self.char_total)

    @property
    def word_accuracy(self) -> Fraction:
        return Fraction(self.word_correct, self.word_total)


@dataclass(frozen=True)
class EvalReport:
    outcomes: tuple[ConfigOutcome, ...]
    n_eval_words: int
    seeds: tuple[int, ...]

    def rows(self, label: str) -> list[ConfigOutcome]:
        return [o for o in self.outcomes if o.label == label]

    def to_csv(self) -> str:
        lines = [
            "config,char_acc_numerator,char_acc_denominator,word_acc_numerator,word_acc_denominator,seed"
        ]
        for o in self.outcomes:
            lines.append(
                f"{o.label},{o.char_correct},{o.char_total},{o.word_correct},{o.word_total},{o.seed}"
            )
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        width = max(len("config"), *(len(o.label) for o in self.outcomes))
        header = f"{'config':<{width}}  seed  char_acc  word_acc"
        rule = "-" * len(header)
        lines = [header, rule]
        for o in self.outcomes:
            lines.append(
                f"{o.label:<{width}}  {o.seed:>4}  {float(o.char_accuracy):>8.4f}  {float(o.word_accuracy):>8.4f}"
            )
        return "\n".join(lines) + "\n"


# named random streams so results do not depend on config order
_STREAM_EVAL = 1
_STREAM_DATA = 2
_STREAM_INIT = 3
_STREAM_TRAIN = 4

_VARIANT_CODES = {Hardmax: 1, Softmax: 2, MixHardSoft: 3, AlphaScaled: 4, NoiseAdded: 5}


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(key))


def _derived_seed(*key: int) -> int:
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def select_eval_words(
    lexicon: Lexicon, n: int, seed: int, length_range: tuple[int, int] = (3, 10)
) -> list[str]:
    """Distinct evaluation words with symbol counts in ``length_range``."""
    lo, hi = length_range
    eligible = [w for w in lexicon.words() if lo <= len(alphabet.tokenize(w)) <= hi]
    if len(eligible) < n:
        raise ValueError(f"lexicon has only {len(eligible)} words in range {length_range}")
    rng = _rng(seed, _STREAM_EVAL)
    picks = rng.choice(len(eligible), size=n, replace=False)
    return [eligible[int(i)] for i in picks]


def simulate_eval_samples(
    words: Sequence[str], model: ConfusionModel, seed: int
) -> list[WordSample]:
    """Softmax-representation samples with per-word derived seeds."""
    rng = _rng(seed, _STREAM_EVAL, 2)
    return [
        simulate_word(word, model, Softmax(), int(rng.integers(2**63))) for word in words
    ]


def _train_net_for_variant(
    lexicon: Lexicon,
    model: ConfusionModel,
    variant: Variant,
    seed: int,
    n_pairs: int,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    buffer_size: int,
    net_config: SpellNetConfig,
) -> SpellNet:
    code = _VARIANT_CODES[type(variant)]
    dataset = generate_dataset(
        lexicon, model, variant, n_pairs, _rng(seed, _STREAM_DATA, code), buffer_size
    )
    net = build(net_config, _rng(seed, _STREAM_INIT, code))
    train(
        net,
        dataset,
        TrainConfig(
            epochs=epochs,
            batch_size=batch_size,
            learning_rate=learning_rate,
            seed=_derived_seed(seed, _STREAM_TRAIN, code),
        ),
    )
    return net


def _evaluate_config(
    config: AblationConfig,
    samples: Sequence[WordSample],
    lexicon: Lexicon,
    net: SpellNet | None,
    corrector: NorvigCorrector,
    seed: int,
) -> ConfigOutcome:
    options = PipelineOptions(
        use_dictionary=True,
        use_net=config.uses_net,
        use_norvig=config.use_norvig,
        test_representation=config.test_representation,
    )
    net_outputs: list[np.ndarray | None] = [None] * len(samples)
    if config.uses_net:
        matrices = np.stack(
            [net_input(sample, config.test_representation) for sample in samples]
        )
        for start in range(0, len(samples), 256):
            chunk = forward(net, matrices[start : start + 256])
            for offset in range(chunk.shape[0]):
                net_outputs[start + offset] = chunk[offset]
    char_num = char_den = word_num = 0
    for sample, output in zip(samples, net_outputs):
        result = correct(sample, lexicon, net, options, corrector, net_output=output)
        matches, total = character_matches(result.word, sample.word)
        char_num += matches
        char_den += total
        word_num += int(result.word == sample.word)
    return ConfigOutcome(
        label=config.display_label,
        seed=seed,
        char_correct=char_num,
        char_total=char_den,
        word_correct=word_num,
        word_total=len(samples),
    )


def _baseline_outcome(samples: Sequence[WordSample], seed: int) -> ConfigOutcome:
    char_num = char_den = word_num = 0
    for sample in samples:
        word = argmax_word(sample)
        matches, total = character_matches(word, sample.word)
        char_num += matches
        char_den += total
        word_num += int(word == sample.word)
    return ConfigOutcome("argmax", seed, char_num, char_den, word_num, len(samples))


def _limit_worker_threads() -> None:
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=1)
    except ImportError:
        pass


def _run_variant_job(args) -> list[tuple[int, ConfigOutcome]]:
    (
        seed,
        variant,
        config_items,
        samples,
        lexicon,
        training_lexicon,
        model,
        n_pairs,
        epochs,
        batch_size,
        learning_rate,
        buffer_size,
        net_config,
        limit_threads,
    ) = args
    if limit_threads:
        _limit_worker_threads()
    net = _train_net_for_variant(
        training_lexicon,
        model,
        variant,
        seed,
        n_pairs,
        epochs,
        batch_size,
        learning_rate,
        buffer_size,
        net_config,
    )
    corrector = NorvigCorrector(lexicon)
    return [
        (order, _evaluate_config(config, samples, lexicon, net, corrector, seed))
        for order, config in config_items
    ]


def run_ablation(
    lexicon: Lexicon,
    model: ConfusionModel,
    configs: Sequence[AblationConfig],
    n_eval_words: int = 100,
    seeds: Sequence[int] = (0,),
    *,
    n_pairs: int = 9830,
    epochs: int = 100,
    batch_size: int = 1024,
    learning_rate: float = 0.001,
    buffer_size: int = 80,
    net_config: SpellNetConfig | None = None,
    eval_length_range: tuple[int, int] = (3, 10),
    n_jobs: int = 1,
) -> EvalReport:
    """Train and evaluate every configuration on a shared held-out sample.

    Per seed: evaluation words are drawn first (disjoint from the training
    pool), one network is trained per distinct training variant, and every
    config is scored on the same simulated samples. The report is a pure
    function of (lexicon, model, configs, seeds and sizes); (seed, variant)
    training jobs may run in parallel without changing it.
    """
    if not configs:
        raise ValueError("need at least one configuration")
    net_config = net_config or SpellNetConfig()
    per_seed: dict[int, dict] = {}
    jobs = []
    no_net_results: list[tuple[int, int, ConfigOutcome]] = []
    for seed in seeds:
        eval_words = select_eval_words(lexicon, n_eval_words, seed, eval_length_range)
        samples = simulate_eval_samples(eval_words, model, seed)
        training_lexicon = lexicon.without(eval_words)
        per_seed[seed] = {"samples": samples}
        no_net_results.append((seed, -1, _baseline_outcome(samples, seed)))
        corrector = NorvigCorrector(lexicon)
        by_variant: dict[type, list[tuple[int, AblationConfig]]] = {}
        for order, config in enumerate(configs):
            if not config.uses_net:
                no_net_results.append(
                    (seed, order, _evaluate_config(config, samples, lexicon, None, corrector, seed))
                )
            else:
                by_variant.setdefault(type(config.train_variant), []).append((order, config))
        for items in by_variant.values():
            jobs.append(
                (
                    seed,
                    items[0][1].train_variant,
                    tuple(items),
                    samples,
                    lexicon,
                    training_lexicon,
                    model,
                    n_pairs,
                    epochs,
                    batch_size,
                    learning_rate,
                    buffer_size,
                    net_config,
                    n_jobs > 1,
                )
            )
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(n_jobs, len(jobs), os.cpu_count() or 1)) as pool:
            job_results = list(pool.map(_run_variant_job, jobs))
    else:
        job_results = [_run_variant_job(job) for job in jobs]
    combined = list(no_net_results)
    for job, results in zip(jobs, job_results):
        combined.extend((job[0], order, outcome) for order, outcome in results)
    seed_rank = {seed: i for i, seed in enumerate(seeds)}
    combined.sort(key=lambda item: (seed_rank[item[0]], item[1]))
    return EvalReport(tuple(outcome for _, _, outcome in combined), n_eval_words, tuple(seeds))


def measure_generalization_gap(
    lexicon: Lexicon,
    model: ConfusionModel,
    variant: Variant,
    seed: int,
    *,
    n_pairs: int,
    epochs: int,
    batch_size: int = 1024,
    learning_rate: float = 0.001,
    buffer_size: int = 80,
    n_test_words: int = 300,
    net_config: SpellNetConfig | None = None,
) -> tuple[float, float]:
    """(training, held-out) character accuracy of one trained network.

    Training accuracy reads the net's predictions on its own training
    matrices; held-out accuracy uses freshly simulated softmax samples of
    freshly drawn words. The difference is the generalization gap that
    separates buffer-memorizing variants from augmenting ones.
    """
    net_config = net_config or SpellNetConfig()
    code = _VARIANT_CODES[type(variant)]
    dataset = generate_dataset(
        lexicon, model, variant, n_pairs, _rng(seed, _STREAM_DATA, code), buffer_size
    )
    net = build(net_config, _rng(seed, _STREAM_INIT, code))
    train(
        net,
        dataset,
        TrainConfig(
            epochs=epochs,
            batch_size=batch_size,
            learning_rate=learning_rate,
            seed=_derived_seed(seed, _STREAM_TRAIN, code),
        ),
    )
    from .spellnet import forward

    def batch_char_accuracy(inputs: np.ndarray, targets: np.ndarray) -> float:
        out = forward(net, inputs)
        pred = out.argmax(axis=1)
        true = targets.argmax(axis=1)
        return float((pred == true).mean())

    train_inputs = np.stack([p.input for p in dataset])
    train_targets = np.stack([p.target for p in dataset])
    train_acc = batch_char_accuracy(train_inputs, train_targets)

    rng = _rng(seed, _STREAM_EVAL, 3, code)
    test_inputs = []
    test_targets = []
    for _ in range(n_test_words):
        word = lexicon.sample_word(rng)
        sample = simulate_word(word, model, Softmax(), int(rng.integers(2**63)))
        test_inputs.append(assemble_columns(list(sample.distributions)))
        test_targets.append(word_to_target(word))
    test_acc = batch_char_accuracy(np.stack(test_inputs), np.stack(test_targets))
    return train_acc, test_acc
