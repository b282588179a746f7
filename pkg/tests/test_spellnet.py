import numpy as np
import pytest

from softspell import alphabet
from softspell.channel import Hardmax, MixHardSoft, Softmax, default_model, nearly_noiseless_model
from softspell.lexicon import Lexicon
from softspell.spellnet import (
    EmptyDatasetError,
    EmptyPredictionError,
    InteriorOOVError,
    SampleBuffer,
    SpellNetConfig,
    TrainConfig,
    assemble_columns,
    build,
    decode_output,
    forward,
    generate_dataset,
    load_checkpoint,
    load_dataset,
    predict_word,
    save_checkpoint,
    save_dataset,
    train,
    word_to_target,
)


@pytest.fixture()
def small_lexicon():
    return Lexicon.load(["sage", "lud", "nimm", "liste", "schule", "menge", "flur", "hand"])


def hardmax_matrix(word: str) -> np.ndarray:
    return word_to_target(word)  # one-hot columns with OOV padding


def test_build_output_is_column_stochastic():
    net = build(rng=np.random.default_rng(0))
    rng = np.random.default_rng(1)
    raw = rng.random((36, 10))
    matrix = raw / raw.sum(axis=0)
    out = forward(net, matrix)
    assert out.shape == (36, 10)
    assert np.all(np.abs(out.sum(axis=0) - 1.0) < 1e-12)
    assert np.all(out >= 0)


def test_build_is_deterministic():
    a = build(rng=np.random.default_rng(42))
    b = build(rng=np.random.default_rng(42))
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa.data, pb.data)


def test_zero_head_init_preserves_argmax():
    net = build(rng=np.random.default_rng(0))
    assert predict_word(net, hardmax_matrix("SAGE")) == "SAGE"
    assert predict_word(net, hardmax_matrix("SCHULE")) == "SCHULE"


def test_config_validation():
    with pytest.raises(ValueError):
        SpellNetConfig(block_kernel=2)
    with pytest.raises(ValueError):
        SpellNetConfig(block_width=0)


def test_word_to_target_shape_and_padding():
    target = word_to_target("SAGE")
    assert target.shape == (36, 10)
    assert np.all(target.sum(axis=0) == 1.0)
    assert target[alphabet.index_of("S"), 0] == 1.0
    assert target[alphabet.index_of("E"), 3] == 1.0
    for col in range(4, 10):
        assert target[alphabet.OOV_INDEX, col] == 1.0


def test_assemble_columns_pads_with_oov():
    vectors = [alphabet.one_hot("S"), alphabet.one_hot("A")]
    matrix = assemble_columns(vectors)
    assert matrix[alphabet.index_of("S"), 0] == 1.0
    assert matrix[alphabet.OOV_INDEX, 2] == 1.0
    assert np.all(matrix.sum(axis=0) == 1.0)
    with pytest.raises(ValueError):
        assemble_columns([alphabet.one_hot("S")] * 11)


def test_generate_dataset_hardmax_noiseless(small_lexicon):
    lex = Lexicon.load(["sage"])
    pairs = generate_dataset(
        lex, nearly_noiseless_model(), Hardmax(), n_pairs=3, rng=np.random.default_rng(0)
    )
    assert len(pairs) == 3
    for pair in pairs:
        assert np.array_equal(pair.input, word_to_target("SAGE"))
        assert np.array_equal(pair.target, word_to_target("SAGE"))


def test_generate_dataset_columns_are_stochastic(small_lexicon):
    pairs = generate_dataset(
        small_lexicon, default_model(), Softmax(), n_pairs=20, rng=np.random.default_rng(1)
    )
    assert len(pairs) == 20
    for pair in pairs:
        assert np.all(np.abs(pair.input.sum(axis=0) - 1.0) < 1e-12)
        # OOV mass appears only in padding columns
        word_len = int((pair.target[alphabet.OOV_INDEX] == 0).sum())
        assert np.all(pair.input[alphabet.OOV_INDEX, :word_len] == 0.0)
        assert np.all(pair.input[alphabet.OOV_INDEX, word_len:] == 1.0)


def test_generate_dataset_deterministic(small_lexicon):
    a = generate_dataset(small_lexicon, default_model(), MixHardSoft(), 10, np.random.default_rng(7))
    b = generate_dataset(small_lexicon, default_model(), MixHardSoft(), 10, np.random.default_rng(7))
    for pa, pb in zip(a, b):
        assert np.array_equal(pa.input, pb.input)
        assert np.array_equal(pa.target, pb.target)


def test_softmax_variant_draws_from_buffer(small_lexicon):
    rng = np.random.default_rng(3)
    buffer = SampleBuffer.build(default_model(), rng, size=3)
    assert buffer.vectors.shape == (35, 3, 36)
    pairs = generate_dataset(
        small_lexicon, default_model(), Softmax(), n_pairs=12, rng=np.random.default_rng(3), buffer_size=3
    )
    # rebuild the same buffer (same rng consumption) and check membership
    buffer2 = SampleBuffer.build(default_model(), np.random.default_rng(3), size=3)
    for pair in pairs:
        word_len = int((pair.target[alphabet.OOV_INDEX] == 0).sum())
        for col in range(word_len):
            symbol_idx = int(pair.target[:, col].argmax())
            pool = buffer2.vectors[symbol_idx]
            assert any(np.array_equal(pair.input[:, col], vec) for vec in pool)


def test_train_epochs_zero_is_identity(small_lexicon):
    pairs = generate_dataset(small_lexicon, default_model(), Hardmax(), 8, np.random.default_rng(0))
    net = build(rng=np.random.default_rng(5))
    before = [p.data.copy() for p in net.parameters()]
    history = train(net, pairs, TrainConfig(epochs=0, seed=0))
    assert history == []
    for p, b in zip(net.parameters(), before):
        assert np.array_equal(p.data, b)


def test_train_empty_dataset_raises():
    net = build(rng=np.random.default_rng(0))
    with pytest.raises(EmptyDatasetError):
        train(net, [], TrainConfig(epochs=1))


def test_overfit_small_batch(small_lexicon):
    pairs = generate_dataset(small_lexicon, default_model(), Hardmax(), 5, np.random.default_rng(2))
    net = build(rng=np.random.default_rng(2))
    history = train(net, pairs, TrainConfig(epochs=300, seed=2))
    assert history[-1].char_accuracy == 1.0


def test_train_is_deterministic(small_lexicon):
    pairs = generate_dataset(small_lexicon, default_model(), Hardmax(), 16, np.random.default_rng(4))
    net_a = build(rng=np.random.default_rng(9))
    net_b = build(rng=np.random.default_rng(9))
    hist_a = train(net_a, pairs, TrainConfig(epochs=3, batch_size=8, seed=11))
    hist_b = train(net_b, pairs, TrainConfig(epochs=3, batch_size=8, seed=11))
    assert hist_a == hist_b
    for pa, pb in zip(net_a.parameters(), net_b.parameters()):
        assert np.array_equal(pa.data, pb.data)
    for sa, sb in zip(net_a.state_arrays(), net_b.state_arrays()):
        assert np.array_equal(sa, sb)


def test_forward_batch_independence(small_lexicon):
    pairs = generate_dataset(small_lexicon, default_model(), Softmax(), 6, np.random.default_rng(6))
    net = build(rng=np.random.default_rng(3))
    train(net, pairs, TrainConfig(epochs=2, batch_size=4, seed=0))
    batch = np.stack([p.input for p in pairs])
    batched = forward(net, batch)
    for i, pair in enumerate(pairs):
        single = forward(net, pair.input)
        assert np.allclose(batched[i], single, atol=1e-12)


def test_forward_infer_deterministic(small_lexicon):
    net = build(rng=np.random.default_rng(0))
    matrix = hardmax_matrix("LISTE")
    assert np.array_equal(forward(net, matrix), forward(net, matrix))


def test_forward_shape_error():
    from softspell.nn import ShapeMismatchError

    net = build(rng=np.random.default_rng(0))
    with pytest.raises(ShapeMismatchError):
        forward(net, np.zeros((35, 10)))


def test_decode_output_strips_trailing_oov():
    matrix = word_to_target("SAGE")
    assert decode_output(matrix) == "SAGE"


def test_decode_output_empty_prediction():
    matrix = word_to_target("A")
    matrix[:, 0] = 0.0
    matrix[alphabet.OOV_INDEX, 0] = 1.0
    with pytest.raises(EmptyPredictionError):
        decode_output(matrix)


def test_decode_output_interior_oov():
    matrix = word_to_target("SAGE")
    matrix[:, 1] = 0.0
    matrix[alphabet.OOV_INDEX, 1] = 1.0  # S _ G E
    with pytest.raises(InteriorOOVError):
        decode_output(matrix)


def test_checkpoint_round_trip(tmp_path, small_lexicon):
    pairs = generate_dataset(small_lexicon, default_model(), Hardmax(), 8, np.random.default_rng(1))
    net = build(rng=np.random.default_rng(1))
    train(net, pairs, TrainConfig(epochs=2, batch_size=4, seed=1))
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, path)
    loaded = load_checkpoint(path)
    assert loaded.config == net.config
    for pa, pb in zip(net.parameters(), loaded.parameters()):
        assert np.array_equal(pa.data, pb.data)
    for sa, sb in zip(net.state_arrays(), loaded.state_arrays()):
        assert np.array_equal(sa, sb)
    # bit-exact: saving again produces identical bytes
    save_checkpoint(loaded, tmp_path / "net2.ckpt")
    assert (tmp_path / "net.ckpt").read_bytes() == (tmp_path / "net2.ckpt").read_bytes()
    # inference agrees exactly
    matrix = hardmax_matrix("SAGE")
    assert np.array_equal(forward(net, matrix), forward(loaded, matrix))


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTANETX" + b"\x00" * 64)
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_checkpoint_rejects_truncation(tmp_path):
    net = build(rng=np.random.default_rng(0))
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-16])
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_dataset_file_round_trip(tmp_path, small_lexicon):
    pairs = generate_dataset(small_lexicon, default_model(), Softmax(), 5, np.random.default_rng(8))
    path = tmp_path / "pairs.bin"
    save_dataset(pairs, path)
    loaded = load_dataset(path)
    assert len(loaded) == len(pairs)
    for a, b in zip(pairs, loaded):
        assert np.array_equal(a.input, b.input)
        assert np.array_equal(a.target, b.target)


def test_dataset_file_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"WRONGMAG" + b"\x00" * 12)
    with pytest.raises(ValueError):
        load_dataset(path)
