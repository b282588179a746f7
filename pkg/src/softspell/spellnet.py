"""The residual convolutional correction network and its training machinery.

The network maps a 36x10 column-stochastic matrix (one probability column
per letter position, OOV-padded to width 10) to a corrected 36x10 matrix.
A stem conv lifts 36 channels to the block width, two residual blocks do
the contextual work, and a 1x1 head projects back to 36 channels. The raw
input is added to the head output before the column softmax, and the head
starts at zero, so a fresh network is argmax-preserving: it can only
improve on the identity.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import alphabet, nn
from .channel import ConfusionModel, MixHardSoft, Softmax, Variant, sample_logits, to_distribution
from .lexicon import EmptyLexiconError, Lexicon


class PredictionError(Exception):
    """Base class for word decoding failures."""


class InteriorOOVError(PredictionError):
    """The network flagged uncertainty inside the word, not just as padding."""


class EmptyPredictionError(PredictionError):
    """Every output column is OOV."""


class EmptyDatasetError(ValueError):
    """Training needs at least one pair."""


@dataclass(frozen=True)
class SpellNetConfig:
    num_residual_blocks: int = 2
    block_width: int = 64
    block_kernel: int = 3
    head_kernel: int = 1
    leaky_slope: float = 0.01

    def __post_init__(self):
        if self.block_kernel % 2 != 1 or self.head_kernel % 2 != 1:
            raise ValueError("kernel sizes must be odd")
        if self.block_width <= 0 or self.num_residual_blocks < 0:
            raise ValueError("width must be positive and block count non-negative")


class _ResidualBlock:
    def __init__(self, config: SpellNetConfig, rng: np.random.Generator):
        k, width = config.block_kernel, config.block_width
        scale = np.sqrt(2.0 / (k * width))
        self.conv1_w = nn.Tensor(rng.standard_normal((k, width, width)) * scale, requires_grad=True)
        self.conv1_b = nn.Tensor(np.zeros(width), requires_grad=True)
        self.bn1 = nn.BatchNorm(width)
        self.conv2_w = nn.Tensor(rng.standard_normal((k, width, width)) * scale, requires_grad=True)
        self.conv2_b = nn.Tensor(np.zeros(width), requires_grad=True)
        self.bn2 = nn.BatchNorm(width)

    def forward(self, x: nn.Tensor, slope: float, training: bool) -> nn.Tensor:
        h = self.bn1(nn.leaky_relu(nn.conv1d(x, self.conv1_w, self.conv1_b), slope), training)
        z = nn.add(nn.conv1d(h, self.conv2_w, self.conv2_b), x)
        return self.bn2(nn.leaky_relu(z, slope), training)

    def parameters(self) -> list[nn.Tensor]:
        return [
            self.conv1_w, self.conv1_b, self.bn1.gamma, self.bn1.beta,
            self.conv2_w, self.conv2_b, self.bn2.gamma, self.bn2.beta,
        ]

    def state_arrays(self) -> list[np.ndarray]:
        return [self.bn1.running_mean, self.bn1.running_var, self.bn2.running_mean, self.bn2.running_var]


class SpellNet:
    """Parameters and forward pass of the correction network."""

    def __init__(self, config: SpellNetConfig, rng: np.random.Generator):
        self.config = config
        width = config.block_width
        stem_scale = np.sqrt(2.0 / (config.block_kernel * alphabet.NUM_SYMBOLS))
        self.stem_w = nn.Tensor(
            rng.standard_normal((config.block_kernel, alphabet.NUM_SYMBOLS, width)) * stem_scale,
            requires_grad=True,
        )
        self.stem_b = nn.Tensor(np.zeros(width), requires_grad=True)
        self.blocks = [_ResidualBlock(config, rng) for _ in range(config.num_residual_blocks)]
        # zero head + global input skip: the fresh network is argmax-preserving
        self.head_w = nn.Tensor(
            np.zeros((config.head_kernel, width, alphabet.NUM_SYMBOLS)), requires_grad=True
        )
        self.head_b = nn.Tensor(np.zeros(alphabet.NUM_SYMBOLS), requires_grad=True)

    def parameters(self) -> list[nn.Tensor]:
        params = [self.stem_w, self.stem_b]
        for block in self.blocks:
            params.extend(block.parameters())
        params.extend([self.head_w, self.head_b])
        return params

    def state_arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for block in self.blocks:
            out.extend(block.state_arrays())
        return out

    def logits_graph(self, x: nn.Tensor, training: bool) -> nn.Tensor:
        """Pre-softmax forward (head output plus the global input skip)."""
        slope = self.config.leaky_slope
        h = nn.conv1d(x, self.stem_w, self.stem_b)
        for block in self.blocks:
            h = block.forward(h, slope, training)
        head = nn.conv1d(h, self.head_w, self.head_b)
        return nn.add(head, x)

    def forward_graph(self, x: nn.Tensor, training: bool) -> nn.Tensor:
        """Channels-last forward: x is (batch, 10, 36), output likewise."""
        return nn.softmax_columns(self.logits_graph(x, training))

    def forward(self, matrix: np.ndarray) -> np.ndarray:
        """Inference-mode forward; accepts (36, 10) or (batch, 36, 10)."""
        return forward(self, matrix)


def build(config: SpellNetConfig | None = None, rng: np.random.Generator | None = None) -> SpellNet:
    """Construct a network with He-scaled convs, unit batchnorm, zero head."""
    return SpellNet(config or SpellNetConfig(), rng if rng is not None else np.random.default_rng())


def forward(net: SpellNet, matrix: np.ndarray) -> np.ndarray:
    """Deterministic inference (running-statistics batchnorm).

    Takes and returns the public 36x10 matrix orientation; internally the
    network computes channels-last.
    """
    data = np.asarray(matrix, dtype=np.float64)
    single = data.ndim == 2
    if single:
        data = data[None]
    expected = (alphabet.NUM_SYMBOLS, alphabet.MAX_WORD_LENGTH)
    if data.ndim != 3 or data.shape[1:] != expected:
        raise nn.ShapeMismatchError(f"expected (batch,) + {expected}, got {np.shape(matrix)}")
    x = nn.Tensor(np.ascontiguousarray(data.transpose(0, 2, 1)))
    out = net.forward_graph(x, training=False).data.transpose(0, 2, 1)
    return out[0] if single else out


def decode_output(matrix: np.ndarray) -> str:
    """Decode a 36x10 network output into a word via per-column argmax.

    A trailing run of OOV columns is padding and is stripped; an OOV column
    inside the word means the network is unsure and the caller should fall
    back to another correction stage.
    """
    indices = np.asarray(matrix).argmax(axis=0)
    non_oov = np.flatnonzero(indices != alphabet.OOV_INDEX)
    if non_oov.size == 0:
        raise EmptyPredictionError("every column is OOV")
    last = int(non_oov[-1])
    word_indices = indices[: last + 1]
    if np.any(word_indices == alphabet.OOV_INDEX):
        raise InteriorOOVError("OOV column inside the predicted word")
    return alphabet.detokenize(alphabet.symbol_at(int(i)) for i in word_indices)


def predict_word(net: SpellNet, matrix: np.ndarray) -> str:
    """Run inference on one 36x10 matrix and decode the word."""
    return decode_output(forward(net, matrix))


@dataclass
class TrainingPair:
    """One (noisy distribution matrix, one-hot truth matrix) example, both 36x10."""

    input: np.ndarray
    target: np.ndarray


def word_to_target(word: str | tuple[str, ...]) -> np.ndarray:
    """One-hot columns for the word's symbols, OOV columns beyond its length."""
    symbols = alphabet.tokenize(word) if isinstance(word, str) else tuple(word)
    matrix = np.zeros((alphabet.NUM_SYMBOLS, alphabet.MAX_WORD_LENGTH))
    for col in range(alphabet.MAX_WORD_LENGTH):
        symbol = symbols[col] if col < len(symbols) else alphabet.OOV
        matrix[alphabet.index_of(symbol), col] = 1.0
    return matrix


def assemble_columns(vectors) -> np.ndarray:
    """Stack per-letter distribution vectors into a 36x10 matrix, OOV-padded."""
    vectors = list(vectors)
    if len(vectors) > alphabet.MAX_WORD_LENGTH:
        raise ValueError(f"at most {alphabet.MAX_WORD_LENGTH} letters, got {len(vectors)}")
    matrix = np.zeros((alphabet.NUM_SYMBOLS, alphabet.MAX_WORD_LENGTH))
    for col, vec in enumerate(vectors):
        matrix[:, col] = vec
    for col in range(len(vectors), alphabet.MAX_WORD_LENGTH):
        matrix[alphabet.OOV_INDEX, col] = 1.0
    return matrix


def _harden(distribution: np.ndarray) -> np.ndarray:
    out = np.zeros_like(distribution)
    out[int(np.argmax(distribution[: alphabet.NUM_GESTURES]))] = 1.0
    return out


class SampleBuffer:
    """A finite pool of pre-sampled classifier outputs per gesture.

    Mirrors training on buffered outputs of a real classifier: the softmax
    variants draw from this pool, so a small pool is memorizable and a
    large one is not.
    """

    def __init__(self, vectors: np.ndarray):
        self.vectors = vectors  # (35, size, 36)

    @classmethod
    def build(cls, model: ConfusionModel, rng: np.random.Generator, size: int = 80) -> "SampleBuffer":
        pools = np.empty((alphabet.NUM_GESTURES, size, alphabet.NUM_SYMBOLS))
        for idx, symbol in enumerate(alphabet.GESTURES):
            for slot in range(size):
                logits = sample_logits(model, symbol, rng)
                pools[idx, slot] = to_distribution(logits, Softmax(), rng, model.temperature)
        return cls(pools)

    @property
    def size(self) -> int:
        return self.vectors.shape[1]

    def draw(self, symbol: str, rng: np.random.Generator) -> np.ndarray:
        pool = self.vectors[alphabet.index_of(symbol)]
        return pool[int(rng.integers(self.size))]


def generate_dataset(
    lexicon: Lexicon,
    model: ConfusionModel,
    variant: Variant,
    n_pairs: int = 9830,
    rng: np.random.Generator | None = None,
    buffer_size: int = 80,
) -> list[TrainingPair]:
    """Sample words and simulate their per-letter classifier outputs.

    Softmax and mixed variants draw letters from a :class:`SampleBuffer`
    of ``buffer_size`` pre-sampled outputs per gesture; the other variants
    sample fresh logits for every letter.
    """
    if len(lexicon) == 0:
        raise EmptyLexiconError("cannot generate training pairs from an empty lexicon")
    rng = np.random.default_rng() if rng is None else rng
    buffered = isinstance(variant, (Softmax, MixHardSoft))
    buffer = SampleBuffer.build(model, rng, buffer_size) if buffered else None
    pairs: list[TrainingPair] = []
    for _ in range(n_pairs):
        word = lexicon.sample_word(rng)
        symbols = alphabet.tokenize(word)
        columns = []
        for symbol in symbols:
            if buffer is not None:
                vec = buffer.draw(symbol, rng)
                if isinstance(variant, MixHardSoft) and rng.random() < variant.p_hard:
                    vec = _harden(vec)
            else:
                logits = sample_logits(model, symbol, rng)
                vec = to_distribution(logits, variant, rng, model.temperature)
            columns.append(vec)
        pairs.append(TrainingPair(assemble_columns(columns), word_to_target(symbols)))
    return pairs


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 1024
    learning_rate: float = 0.001
    seed: int = 0


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    char_accuracy: float


def train(net: SpellNet, dataset: list[TrainingPair], config: TrainConfig) -> list[EpochStats]:
    """Shuffled mini-batch Adam on column-wise cross-entropy.

    Mutates ``net`` in place and returns per-epoch loss and training
    character accuracy (argmax agreement over all columns, padding
    included). Fully determined by (dataset, config).
    """
    if not dataset:
        raise EmptyDatasetError("training dataset is empty")
    nn.tune_allocator()
    # channels-last once up front; the public pair matrices stay 36x10
    inputs = np.ascontiguousarray(
        np.stack([pair.input for pair in dataset]).transpose(0, 2, 1)
    )
    targets = np.ascontiguousarray(
        np.stack([pair.target for pair in dataset]).transpose(0, 2, 1)
    )
    target_indices = targets.argmax(axis=2)
    rng = np.random.default_rng(config.seed)
    optimizer = nn.Adam(net.parameters(), learning_rate=config.learning_rate)
    history: list[EpochStats] = []
    n = len(dataset)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        shuffled_inputs = inputs[order]
        shuffled_targets = targets[order]
        shuffled_indices = target_indices[order]
        loss_sum = 0.0
        columns_seen = 0
        matches = 0
        for start in range(0, n, config.batch_size):
            stop = start + config.batch_size
            x = nn.Tensor(shuffled_inputs[start:stop])
            logits = net.logits_graph(x, training=True)
            loss, probs = nn.softmax_cross_entropy(logits, nn.Tensor(shuffled_targets[start:stop]))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            batch_columns = x.data.shape[0] * alphabet.MAX_WORD_LENGTH
            loss_sum += float(loss.data) * batch_columns
            columns_seen += batch_columns
            matches += int((probs.argmax(axis=2) == shuffled_indices[start:stop]).sum())
        history.append(
            EpochStats(epoch=epoch, loss=loss_sum / columns_seen, char_accuracy=matches / columns_seen)
        )
    return history


_CHECKPOINT_MAGIC = b"SSPNETCK"
_CHECKPOINT_VERSION = 1
_DATASET_MAGIC = b"SSPDSET1"


def _all_arrays(net: SpellNet) -> list[np.ndarray]:
    return [p.data for p in net.parameters()] + net.state_arrays()


def save_checkpoint(net: SpellNet, path) -> None:
    """Versioned binary: magic, version, config, then parameters and
    batchnorm statistics in declaration order as little-endian float64."""
    cfg = net.config
    header = _CHECKPOINT_MAGIC + struct.pack(
        "<IIIIId",
        _CHECKPOINT_VERSION,
        cfg.num_residual_blocks,
        cfg.block_width,
        cfg.block_kernel,
        cfg.head_kernel,
        cfg.leaky_slope,
    )
    with open(path, "wb") as handle:
        handle.write(header)
        for array in _all_arrays(net):
            handle.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def load_checkpoint(path) -> SpellNet:
    """Inverse of :func:`save_checkpoint`; bit-exact round trip."""
    with open(path, "rb") as handle:
        blob = handle.read()
    if blob[: len(_CHECKPOINT_MAGIC)] != _CHECKPOINT_MAGIC:
        raise ValueError("not a spellnet checkpoint (bad magic)")
    offset = len(_CHECKPOINT_MAGIC)
    version, blocks, width, block_kernel, head_kernel, slope = struct.unpack_from("<IIIIId", blob, offset)
    if version != _CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {version}")
    offset += struct.calcsize("<IIIIId")
    config = SpellNetConfig(
        num_residual_blocks=blocks,
        block_width=width,
        block_kernel=block_kernel,
        head_kernel=head_kernel,
        leaky_slope=slope,
    )
    net = SpellNet(config, np.random.default_rng(0))
    for array in _all_arrays(net):
        count = array.size
        values = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        array[...] = values.reshape(array.shape)
    if offset != len(blob):
        raise ValueError("checkpoint has trailing bytes; file is corrupt")
    return net


def save_dataset(pairs: list[TrainingPair], path) -> None:
    """Binary dataset: count and shape header, then pairs as little-endian float64."""
    with open(path, "wb") as handle:
        handle.write(_DATASET_MAGIC)
        handle.write(struct.pack("<III", len(pairs), alphabet.NUM_SYMBOLS, alphabet.MAX_WORD_LENGTH))
        for pair in pairs:
            handle.write(np.ascontiguousarray(pair.input, dtype="<f8").tobytes())
            handle.write(np.ascontiguousarray(pair.target, dtype="<f8").tobytes())


def load_dataset(path) -> list[TrainingPair]:
    with open(path, "rb") as handle:
        blob = handle.read()
    if blob[: len(_DATASET_MAGIC)] != _DATASET_MAGIC:
        raise ValueError("not a spellnet dataset (bad magic)")
    offset = len(_DATASET_MAGIC)
    count, channels, length = struct.unpack_from("<III", blob, offset)
    offset += struct.calcsize("<III")
    matrix_size = channels * length
    pairs = []
    for _ in range(count):
        inp = np.frombuffer(blob, dtype="<f8", count=matrix_size, offset=offset).reshape(channels, length)
        offset += matrix_size * 8
        tgt = np.frombuffer(blob, dtype="<f8", count=matrix_size, offset=offset).reshape(channels, length)
        offset += matrix_size * 8
        pairs.append(TrainingPair(inp.copy(), tgt.copy()))
    if offset != len(blob):
        raise ValueError("dataset has trailing bytes; file is corrupt")
    return pairs
