import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synpriming import lm
from synpriming.corpus import split_sentences, synthetic_corpus
from synpriming.lm import lstm


def test_vocabulary_build_orders_by_count():
    v = lm.Vocabulary.build(["b", "a", "a", "c", "b", "a", "<eos>", "<eos>"], min_count=2)
    assert v.tokens == ("<eos>", "<unk>", "a", "b")
    assert v.id("c") == v.unk_id
    assert list(v.decode(v.encode(["a", "zzz"]))) == ["a", "<unk>"]


def test_vocabulary_requires_specials():
    with pytest.raises(ValueError):
        lm.Vocabulary(("a", "b"))


@pytest.mark.parametrize("nlayers", [1, 2])
def test_gradients_match_finite_differences(toy_vocab, nlayers):
    snap = lm.random_init(lm.LstmHyper(nhid=5, nlayers=nlayers, emb_dim=4, init_scale=0.5), toy_vocab,
                          seed=1, dtype=np.float64)
    batch = np.random.default_rng(2).integers(0, len(toy_vocab), size=(3, 7))
    assert lm.gradient_check(snap, batch, per_tensor=20) < 1e-4


def test_masked_loss_ignores_masked_positions(toy_vocab):
    snap = lm.random_init(lm.LstmHyper(nhid=4, nlayers=1), toy_vocab, seed=0, dtype=np.float64)
    inp = np.array([[0, 2, 3, 4]])
    tgt = np.array([[2, 3, 4, 5]])
    other = tgt.copy()
    other[0, 3] = 7
    mask = np.array([[1, 1, 1, 0]], dtype=float)
    assert lstm.loss(snap.params, inp, tgt, mask) == pytest.approx(lstm.loss(snap.params, inp, other, mask))


def test_clip_grads_caps_global_norm():
    g = {"a": np.full(4, 3.0), "b": np.full(4, 4.0)}
    lstm.clip_grads(g, 1.0)
    assert np.sqrt(sum((x ** 2).sum() for x in g.values())) == pytest.approx(1.0)


def test_surprisal_is_bits_and_batching_is_consistent(toy_vocab):
    snap = lm.random_init(lm.LstmHyper(nhid=6, nlayers=2), toy_vocab, seed=3)
    sents = [["w1", "w2", "<eos>"], ["w3", "<eos>"], ["w4", "w5", "w6", "w7", "<eos>"]]
    together = lm.surprisals(snap, sents)
    for s, ts in zip(sents, together):
        alone = lm.surprisal(snap, s)
        np.testing.assert_allclose(alone.values, ts.values, rtol=1e-6, atol=1e-6)
    probs = lm.forward(snap, [toy_vocab.eos_id] + toy_vocab.encode(sents[0]).tolist())
    want = -np.log2(probs[np.arange(3), toy_vocab.encode(sents[0])])
    np.testing.assert_allclose(together[0].values, want, rtol=1e-5)


def test_unknown_tokens_are_masked(toy_vocab):
    snap = lm.random_init(lm.LstmHyper(nhid=4), toy_vocab, seed=0)
    ts = lm.surprisal(snap, ["zzz", "w1", "<eos>"])
    assert ts.mask.tolist() == [True, False, False]
    with pytest.raises(ValueError):
        lm.mean_surprisal(lm.surprisal(snap, ["zzz", "yyy"]))


def _kgram_oracle(sentences, order, vocab, alpha, extra=(), weight=1.0):
    counts = {}
    for s, w in [(s, 1.0) for s in sentences] + [(s, weight) for s in extra]:
        ids = [vocab.eos_id] * (order - 1) + vocab.encode(s).tolist()
        for t in range(order - 1, len(ids)):
            key = tuple(ids[t - order + 1:t + 1])
            counts[key] = counts.get(key, 0.0) + w

    def prob(ctx, tgt):
        tot = sum(c for k, c in counts.items() if k[:-1] == ctx)
        return (counts.get(ctx + (tgt,), 0.0) + alpha) / (tot + alpha * len(vocab))
    return prob


@pytest.mark.parametrize("order", [1, 2, 3])
def test_kgram_matches_count_oracle(order):
    corpus = "a b c <eos> a c <eos> b b a <eos> a b <eos>".split()
    vocab = lm.Vocabulary.build(corpus, min_count=1)
    snap = lm.kgram_model(corpus, lm.KGramHyper(order=order, alpha=0.1), vocab)
    prob = _kgram_oracle(split_sentences(corpus), order, vocab, 0.1)
    sent = ["a", "b", "a", "<eos>"]
    ids = [vocab.eos_id] * (order - 1) + vocab.encode(sent).tolist()
    want = [-np.log2(prob(tuple(ids[t - order + 1:t]), ids[t])) for t in range(order - 1, len(ids))]
    np.testing.assert_allclose(lm.surprisal(snap, sent).values, want, atol=1e-12)
    # adaptation adds learning_rate times each n-gram count
    adapted = lm.adapt(snap, [["c", "c", "<eos>"]], lm.AdaptConfig(learning_rate=2.0))
    prob2 = _kgram_oracle(split_sentences(corpus), order, vocab, 0.1, [["c", "c", "<eos>"]], 2.0)
    want2 = [-np.log2(prob2(tuple(ids[t - order + 1:t]), ids[t])) for t in range(order - 1, len(ids))]
    np.testing.assert_allclose(lm.surprisal(adapted, sent).values, want2, atol=1e-12)


def test_kgram_distribution_sums_to_one():
    corpus = "a b <eos> b a <eos>".split()
    snap = lm.kgram_model(corpus, lm.KGramHyper(order=2))
    p = lm.forward(snap, snap.vocab.encode(["a", "b"]))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)


def test_adapt_leaves_base_untouched_and_records_provenance(toy_vocab):
    snap = lm.random_init(lm.LstmHyper(nhid=4), toy_vocab, seed=0)
    before = {k: v.copy() for k, v in snap.params.items()}
    out = lm.adapt(snap, [["w1", "w2", "<eos>"]], set_id="x")
    for k in before:
        np.testing.assert_array_equal(snap.params[k], before[k])
    assert out.provenance["adaptations"] == ["x"]
    assert any(not np.array_equal(out.params[k], before[k]) for k in before)
    with pytest.raises(ValueError):
        lm.adapt(snap, [])


def test_adapt_lowers_surprisal_of_adaptation_sentence(toy_vocab):
    snap = lm.random_init(lm.LstmHyper(nhid=8), toy_vocab, seed=0)
    s = ["w1", "w2", "w3", "<eos>"]
    after = lm.adapt(snap, [s], lm.AdaptConfig(learning_rate=1.0))
    assert lm.mean_surprisal(lm.surprisal(after, s)) < lm.mean_surprisal(lm.surprisal(snap, s))


def test_train_rejects_tiny_corpus():
    with pytest.raises(ValueError, match="bptt_len"):
        lm.train(["a", "<eos>"] * 5, lm.LstmHyper(nhid=4, bptt_len=35))


def test_training_reduces_validation_loss(lexicon):
    corpus = synthetic_corpus(*lexicon, 6000, seed=1)
    snap = lm.train(corpus, lm.LstmHyper(nhid=16, epochs=2, bptt_len=20, batch_size=8))
    losses = snap.provenance["valid_loss"]
    assert losses[-1] < losses[0]
    assert snap.backend == lm.LSTM


def test_checkpoint_round_trip_is_bit_exact(tmp_path, toy_vocab):
    snap = lm.random_init(lm.LstmHyper(nhid=5, nlayers=2, emb_dim=3), toy_vocab, seed=4)
    path = tmp_path / "m.ckpt"
    lm.save_checkpoint(snap, path)
    back = lm.load_checkpoint(path)
    for k, v in snap.params.items():
        assert back.params[k].tobytes() == v.tobytes()
    assert lm.to_bytes(back) == path.read_bytes()
    assert back.hyper == snap.hyper and back.vocab == snap.vocab


def test_kgram_checkpoint_round_trip(tmp_path):
    snap = lm.kgram_model("a b <eos> a a <eos>".split(), lm.KGramHyper(order=2))
    back = lm.from_bytes(lm.to_bytes(snap))
    np.testing.assert_array_equal(back.params["counts"], snap.params["counts"])
    assert lm.surprisal(back, ["a", "<eos>"]).values.tolist() == lm.surprisal(snap, ["a", "<eos>"]).values.tolist()


@pytest.mark.parametrize("mutate", ["magic", "truncate", "trailing"])
def test_corrupt_checkpoints_are_rejected(toy_vocab, mutate):
    data = lm.to_bytes(lm.random_init(lm.LstmHyper(nhid=3), toy_vocab))
    bad = {"magic": b"X" + data[1:], "truncate": data[:-7], "trailing": data + b"\0\0\0\0"}[mutate]
    with pytest.raises(lm.CheckpointError):
        lm.from_bytes(bad)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(2, 11), min_size=1, max_size=8))
def test_surprisal_is_nonnegative_and_finite(toy_vocab, ids):
    snap = lm.random_init(lm.LstmHyper(nhid=4, nlayers=1), toy_vocab, seed=0)
    toks = [toy_vocab.tokens[i] for i in ids] + ["<eos>"]
    v = lm.surprisal(snap, toks).values
    assert np.all(np.isfinite(v)) and np.all(v >= 0)
