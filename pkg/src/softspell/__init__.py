"""softspell: spell-correction that consumes per-character probability distributions.

Classifier softmax outputs go in, dictionary-checked words come out. The
pipeline combines a residual convolutional correction network trained on
36x10 distribution matrices, a dictionary lookup, and a prior-weighted
edit-distance corrector, with a calibrated synthetic classifier standing in
for a real gesture recognizer.
"""

from .alphabet import (
    MAX_WORD_LENGTH,
    NUM_GESTURES,
    NUM_SYMBOLS,
    OOV,
    OOV_INDEX,
    SYMBOLS,
    detokenize,
    index_of,
    one_hot,
    symbol_at,
    tokenize,
)
from .channel import (
    AlphaScaled,
    CalibrationResult,
    ConfusionModel,
    Hardmax,
    MixHardSoft,
    NoiseAdded,
    Softmax,
    calibrate,
    default_model,
    empirical_topk,
    load_model,
    sample_logits,
    save_model,
    to_distribution,
)
from .estimator import SpellNetCorrector
from .evaluation import (
    AblationConfig,
    EvalReport,
    character_accuracy,
    config_from_key,
    run_ablation,
    standard_configs,
    word_accuracy,
)
from .lexicon import Lexicon, load_default
from .pipeline import (
    CorrectionResult,
    PipelineOptions,
    WordSample,
    argmax_word,
    correct,
    expected_word_accuracy,
    simulate_word,
)
from .spellnet import (
    SpellNet,
    SpellNetConfig,
    TrainConfig,
    TrainingPair,
    build,
    generate_dataset,
    load_checkpoint,
    predict_word,
    save_checkpoint,
    train,
)
from .statistical import NorvigCorrector, edits_within_1, levenshtein, norvig_correct

__version__ = "0.1.0"

__all__ = [
    "AblationConfig",
    "AlphaScaled",
    "CalibrationResult",
    "ConfusionModel",
    "CorrectionResult",
    "EvalReport",
    "Hardmax",
    "Lexicon",
    "MAX_WORD_LENGTH",
    "MixHardSoft",
    "NUM_GESTURES",
    "NUM_SYMBOLS",
    "NoiseAdded",
    "NorvigCorrector",
    "OOV",
    "OOV_INDEX",
    "PipelineOptions",
    "SYMBOLS",
    "Softmax",
    "SpellNet",
    "SpellNetConfig",
    "SpellNetCorrector",
    "TrainConfig",
    "TrainingPair",
    "WordSample",
    "argmax_word",
    "build",
    "calibrate",
    "character_accuracy",
    "config_from_key",
    "correct",
    "default_model",
    "detokenize",
    "edits_within_1",
    "empirical_topk",
    "expected_word_accuracy",
    "generate_dataset",
    "index_of",
    "levenshtein",
    "load_checkpoint",
    "load_default",
    "load_model",
    "norvig_correct",
    "one_hot",
    "predict_word",
    "run_ablation",
    "sample_logits",
    "save_checkpoint",
    "save_model",
    "simulate_word",
    "standard_configs",
    "symbol_at",
    "to_distribution",
    "tokenize",
    "train",
    "word_accuracy",
]
