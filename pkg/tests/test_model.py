"""Tests for the encoder-decoder model: buckets, masking, init, causality."""

import math

import numpy as np
import pytest

import wordalchemy.numerics as nm
from wordalchemy.errors import ConfigError, ShapeError
from wordalchemy.model import (
    ModelConfig,
    ModelParams,
    forward,
    init_model,
    param_shapes,
    relative_position_bucket,
    shift_right,
)

TINY = ModelConfig(
    vocab_size=300, d_model=16, n_heads=2, d_ff=32, n_enc_layers=2, n_dec_layers=2,
    max_input_len=10, max_label_len=6,
)


def reference_bucket(rel: int, bidirectional: bool, num_buckets: int, max_distance: int) -> int:
    """Independent scalar transcription of the bucketing rule."""
    bucket = 0
    if bidirectional:
        half = num_buckets // 2
        if rel > 0:
            bucket += half
        pos = abs(rel)
    else:
        half = num_buckets
        pos = max(-rel, 0)
    max_exact = half // 2
    if pos < max_exact:
        return bucket + pos
    large = max_exact + int(
        math.log(pos / max_exact) / math.log(max_distance / max_exact) * (half - max_exact)
    )
    return bucket + min(large, half - 1)


def random_batch(cfg, rng, b=2, ls=7, lt=5):
    inp = rng.integers(3, cfg.vocab_size, (b, ls)).astype(np.int32)
    imask = np.ones((b, ls), np.float32)
    imask[0, ls - 2:] = 0.0
    inp[0, ls - 2:] = 0
    lab = rng.integers(3, cfg.vocab_size, (b, lt)).astype(np.int32)
    lmask = np.ones((b, lt), np.float32)
    lab[0, lt - 1] = 1
    lab[1, lt - 2] = 1
    lab[1, lt - 1:] = 0
    lmask[1, lt - 1:] = 0.0
    dec, dmask = shift_right(lab, lmask)
    return inp, imask, lab, lmask, dec, dmask


# ---------------------------------------------------------------------------
# relative position buckets
# ---------------------------------------------------------------------------

def test_bucket_zero_distance_bidirectional():
    assert relative_position_bucket(0, True, 32, 128) == 0


def test_bucket_hand_computed_values():
    # hand-evaluated: half=16, max_exact=8, log-spaced above 8
    cases = {
        (-7, True): 7,
        (7, True): 23,
        (-8, True): 8,
        (50, True): 29,
        (-50, True): 13,
        (-127, True): 15,
        (127, True): 31,
        (-3, False): 3,
        (-20, False): 17,
        (5, False): 0,
    }
    for (d, bi), expected in cases.items():
        assert relative_position_bucket(d, bi, 32, 128) == expected, (d, bi)


def test_bucket_clamps_beyond_max_distance():
    assert relative_position_bucket(-100000, True, 32, 128) == 15
    assert relative_position_bucket(100000, True, 32, 128) == 31
    assert relative_position_bucket(-100000, False, 32, 128) == 31


def test_bucket_sign_halves_differ():
    for d in (1, 5, 12, 60, 500):
        neg = relative_position_bucket(-d, True, 32, 128)
        pos = relative_position_bucket(d, True, 32, 128)
        assert neg < 16 <= pos


def test_bucket_matches_scalar_reference_everywhere():
    distances = np.arange(-300, 301)
    got = relative_position_bucket(distances, True, 32, 128)
    want = [reference_bucket(int(d), True, 32, 128) for d in distances]
    np.testing.assert_array_equal(got, want)
    got_uni = relative_position_bucket(distances, False, 16, 64)
    want_uni = [reference_bucket(int(d), False, 16, 64) for d in distances]
    np.testing.assert_array_equal(got_uni, want_uni)


def test_bucket_requires_even_buckets_when_bidirectional():
    with pytest.raises(ConfigError):
        relative_position_bucket(3, True, 31, 128)


# ---------------------------------------------------------------------------
# init
# ---------------------------------------------------------------------------

def test_init_is_deterministic():
    a = init_model(TINY, seed=5)
    b = init_model(TINY, seed=5)
    for name in a.tensors:
        assert a[name].data.tobytes() == b[name].data.tobytes()
    c = init_model(TINY, seed=6)
    assert any(a[n].data.tobytes() != c[n].data.tobytes() for n in a.tensors)


def test_init_gains_one_biases_zero():
    params = init_model(TINY, seed=0)
    for name, t in params.tensors.items():
        if name.endswith(".gain"):
            np.testing.assert_array_equal(t.data, np.ones_like(t.data))
        if name.startswith("relpos."):
            np.testing.assert_array_equal(t.data, np.zeros_like(t.data))


def test_tied_embeddings_share_storage():
    tied = init_model(TINY, seed=0)
    assert "lm_head" not in tied.tensors  # output projection is the embedding table
    untied = init_model(ModelConfig(**{**TINY.to_dict(), "tie_embeddings": False}), seed=0)
    assert "lm_head" in untied.tensors


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(vocab_size=300, d_model=10, n_heads=3).validate()
    with pytest.raises(ConfigError):
        ModelConfig(vocab_size=0).validate()


# ---------------------------------------------------------------------------
# forward contracts
# ---------------------------------------------------------------------------

def test_forward_output_shape():
    params = init_model(TINY, seed=1)
    rng = np.random.default_rng(0)
    inp, imask, lab, lmask, dec, dmask = random_batch(TINY, rng)
    logits = forward(params, inp, imask, dec, dmask)
    assert logits.shape == (2, 5, TINY.vocab_size)


def test_forward_is_deterministic():
    params = init_model(TINY, seed=1)
    rng = np.random.default_rng(0)
    inp, imask, lab, lmask, dec, dmask = random_batch(TINY, rng)
    a = forward(params, inp, imask, dec, dmask).data.tobytes()
    b = forward(params, inp, imask, dec, dmask).data.tobytes()
    assert a == b


def test_forward_rejects_overlong_input():
    params = init_model(TINY, seed=1)
    b, ls = 1, TINY.max_input_len + 1
    inp = np.ones((b, ls), np.int32)
    mask = np.ones((b, ls), np.float32)
    dec = np.ones((b, 2), np.int32)
    with pytest.raises(ShapeError, match="exceeds"):
        forward(params, inp, mask, dec, np.ones((b, 2), np.float32))


def test_forward_rejects_out_of_range_ids():
    params = init_model(TINY, seed=1)
    inp = np.full((1, 4), TINY.vocab_size, np.int32)
    with pytest.raises(ShapeError, match="vocab"):
        forward(params, inp, np.ones((1, 4), np.float32), np.zeros((1, 2), np.int32),
                np.ones((1, 2), np.float32))


def causality_violations(params, rng, n_cases=10):
    """Count exact-equality violations for decoder causality."""
    cfg = params.config
    bad = 0
    for _ in range(n_cases):
        inp, imask, lab, lmask, dec, dmask = random_batch(cfg, rng)
        base = forward(params, inp, imask, dec, dmask).data
        t = int(rng.integers(0, dec.shape[1] - 1))
        dec2 = dec.copy()
        dec2[:, t + 1] = (dec2[:, t + 1] + 7) % cfg.vocab_size
        out = forward(params, inp, imask, dec2, dmask).data
        if not np.array_equal(base[:, : t + 1, :], out[:, : t + 1, :]):
            bad += 1
    return bad


def padding_violations(params, rng, n_cases=10):
    """Count exact-equality violations for encoder padding neutrality."""
    cfg = params.config
    bad = 0
    for _ in range(n_cases):
        inp, imask, lab, lmask, dec, dmask = random_batch(cfg, rng)
        base = forward(params, inp, imask, dec, dmask).data
        inp2 = inp.copy()
        padded = np.where(imask == 0.0)
        if padded[0].size == 0:
            continue
        inp2[padded] = (inp2[padded] + 11) % cfg.vocab_size
        out = forward(params, inp2, imask, dec, dmask).data
        if not np.array_equal(base, out):
            bad += 1
    return bad


def test_causality_exact():
    params = init_model(TINY, seed=3)
    assert causality_violations(params, np.random.default_rng(42), n_cases=10) == 0


def test_padding_neutrality_exact():
    params = init_model(TINY, seed=3)
    assert padding_violations(params, np.random.default_rng(43), n_cases=10) == 0


def test_shift_right_example():
    labels = np.array([[7, 9, 1, 0]], np.int32)  # [w1, w2, eos, pad]
    mask = np.array([[1, 1, 1, 0]], np.float32)
    dec, dmask = shift_right(labels, mask, start_id=0)
    np.testing.assert_array_equal(dec, [[0, 7, 9, 1]])
    np.testing.assert_array_equal(dmask, [[1, 1, 1, 1]])
    # inverse consistency on real positions
    np.testing.assert_array_equal(labels[0, :3], dec[0, 1:4])


def test_full_model_grad_check_quick():
    # healthy-scale random params keep finite differences well conditioned
    rng = np.random.default_rng(7)
    tensors = {}
    for name, shape in param_shapes(TINY).items():
        if name.endswith(".gain"):
            data = 1.0 + 0.2 * rng.normal(size=shape)
        else:
            data = rng.normal(0, 0.3, size=shape)
        tensors[name] = nm.parameter(data.astype(np.float32), name)
    params = ModelParams(TINY, tensors)
    inp, imask, lab, lmask, dec, dmask = random_batch(TINY, np.random.default_rng(1))

    def f(p64):
        pp = ModelParams(TINY, dict(p64))
        logits = forward(pp, inp, imask, dec, dmask)
        flat = nm.reshape(logits, (-1, TINY.vocab_size))
        return nm.cross_entropy(flat, lab.reshape(-1), ignore_id=0)

    assert nm.grad_check(f, params.tensors, epsilon=1e-5, max_coords=6) < 1e-4
